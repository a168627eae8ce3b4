//! Composite 16-point Gauss-Legendre panel meshes.
//!
//! Panels are uniform in arclength along each edge, except that the two
//! panels meeting a singular end are equalized in parameter width so the
//! dyadic refinement hierarchy of the RCIP recursion nests exactly.
//!
//! Every panel stores its interval as an anchor parameter plus offsets,
//! and node positions are evaluated through the stable relative
//! parametrization. Meshes local to a singular point additionally place
//! the coordinate origin at the vertex, which keeps kernel distances fully
//! accurate at dyadic depths far below the rounding scale of absolute
//! coordinates.

use super::{arc_length_between, End, Geometry};
use crate::specfun::gauss_legendre_16;
use crate::{Error, Result, C64};
use std::sync::Arc;

pub const NODES_PER_PANEL: usize = 16;

/// How many panels each edge receives.
#[derive(Debug, Clone)]
pub enum Resolution {
    /// `N = ppw * L / lambda` discretization points over the whole curve,
    /// distributed per edge (ppw = points per wavelength).
    PointsPerWavelength(f64),
    /// The same number of panels on every edge.
    UniformPanels(usize),
    /// Explicit panel count per edge.
    PerEdgePanels(Vec<usize>),
}

/// One quadrature panel: the edge-parameter interval
/// `[anchor + d0, anchor + d1]` with 16 nodes.
#[derive(Debug, Clone)]
pub struct Panel {
    pub edge: usize,
    /// Reference parameter the offsets are relative to (a vertex parameter
    /// for refined panels, 0 otherwise).
    pub anchor: f64,
    pub d0: f64,
    pub d1: f64,
    /// Nominal absolute parameter bounds (anchor + d, rounded); used for
    /// bookkeeping, not for evaluation.
    pub u0: f64,
    pub u1: f64,
    /// Global index of the panel's first node; nodes are contiguous.
    pub first_node: usize,
    /// Complex positions of the parameter endpoints, minus the mesh origin.
    pub z0: C64,
    pub z1: C64,
    /// position(anchor) - origin, the constant completing relative node
    /// positions.
    pub corr: C64,
}

impl Panel {
    pub fn nodes(&self) -> std::ops::Range<usize> {
        self.first_node..self.first_node + NODES_PER_PANEL
    }
}

/// An (edge, anchor, offsets) panel description.
#[derive(Debug, Clone, Copy)]
pub struct PanelSpan {
    pub edge: usize,
    pub anchor: f64,
    pub d0: f64,
    pub d1: f64,
}

impl PanelSpan {
    pub fn absolute(edge: usize, u0: f64, u1: f64) -> Self {
        PanelSpan { edge, anchor: 0.0, d0: u0, d1: u1 }
    }
}

/// Gamma* bookkeeping for one incident edge-end of a vertex.
#[derive(Debug, Clone)]
pub struct StarEnd {
    pub edge: usize,
    pub end: End,
    /// Panel ids `[outer, inner]`, inner adjacent to the vertex.
    pub panels: [usize; 2],
    /// Parameter width of Gamma* on this edge (both panels together).
    pub param_width: f64,
}

/// A panel mesh with per-node geometry data.
#[derive(Debug, Clone)]
pub struct PanelMesh {
    pub geom: Arc<Geometry>,
    /// All stored positions are relative to this point (zero for global
    /// meshes, the vertex location for RCIP-local meshes).
    pub origin: C64,
    pub panels: Vec<Panel>,
    /// Complexified node positions (minus origin).
    pub z: Vec<C64>,
    /// Unit normals as complex numbers (tangent rotated by -pi/2).
    pub normal: Vec<C64>,
    /// d(position)/dv with v the panel-local variable in [-1, 1].
    pub dz: Vec<C64>,
    /// |dz|: speed in the panel-local variable.
    pub speed: Vec<f64>,
    /// Arclength quadrature weight: GL16 weight times speed.
    pub weight: Vec<f64>,
    /// Edge parameter of each node (nominal).
    pub param: Vec<f64>,
    /// Gamma* panels per vertex, one entry per incident edge-end.
    pub star: Vec<Vec<StarEnd>>,
}

impl PanelMesh {
    pub fn num_nodes(&self) -> usize {
        self.z.len()
    }

    pub fn position(&self, i: usize) -> [f64; 2] {
        let z = self.z[i] + self.origin;
        [z.re, z.im]
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Panel arclength (sum of its node weights).
    pub fn panel_arclength(&self, p: usize) -> f64 {
        self.panels[p].nodes().map(|i| self.weight[i]).sum()
    }

    /// Panel midpoint, relative to the mesh origin.
    pub fn panel_midpoint(&self, p: usize) -> C64 {
        let panel = &self.panels[p];
        let dm = 0.5 * (panel.d0 + panel.d1);
        let edge = &self.geom.edges[panel.edge];
        edge.position_rel_c(panel.anchor, C64::new(dm, 0.0)) + panel.corr
    }

    /// All Gamma* node indices of a vertex, in mesh order per star end
    /// (outer panel first, then inner).
    pub fn star_nodes(&self, vertex: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for se in &self.star[vertex] {
            for p in se.panels {
                out.extend(self.panels[p].nodes());
            }
        }
        out
    }

    /// Set of panel ids in any vertex's Gamma*.
    pub fn star_panel_flags(&self) -> Vec<Option<usize>> {
        let mut flags = vec![None; self.panels.len()];
        for (v, ends) in self.star.iter().enumerate() {
            for se in ends {
                for p in se.panels {
                    flags[p] = Some(v);
                }
            }
        }
        flags
    }
}

/// Build a mesh from explicit panel spans. Star masks are recomputed from
/// the geometry's vertex registry: the two panels nearest each singular
/// end. All stored positions are relative to `origin`.
pub fn mesh_from_spans(geom: &Arc<Geometry>, spans: &[PanelSpan], origin: C64) -> PanelMesh {
    let rule = gauss_legendre_16();
    let n_nodes = spans.len() * NODES_PER_PANEL;
    let mut mesh = PanelMesh {
        geom: geom.clone(),
        origin,
        panels: Vec::with_capacity(spans.len()),
        z: Vec::with_capacity(n_nodes),
        normal: Vec::with_capacity(n_nodes),
        dz: Vec::with_capacity(n_nodes),
        speed: Vec::with_capacity(n_nodes),
        weight: Vec::with_capacity(n_nodes),
        param: Vec::with_capacity(n_nodes),
        star: vec![Vec::new(); geom.vertices.len()],
    };
    for span in spans {
        let edge = &geom.edges[span.edge];
        let corr = edge.position(span.anchor) - origin;
        let first_node = mesh.z.len();
        let half = 0.5 * (span.d1 - span.d0);
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            let d = span.d0 + half * (xi + 1.0);
            let u = span.anchor + d;
            let z = edge.position_rel_c(span.anchor, C64::new(d, 0.0)) + corr;
            let vel = edge.velocity(u);
            let dz = vel * half;
            let sp = dz.norm();
            mesh.z.push(z);
            mesh.normal.push(-C64::i() * vel / vel.norm());
            mesh.dz.push(dz);
            mesh.speed.push(sp);
            mesh.weight.push(wi * sp);
            mesh.param.push(u);
        }
        mesh.panels.push(Panel {
            edge: span.edge,
            anchor: span.anchor,
            d0: span.d0,
            d1: span.d1,
            u0: span.anchor + span.d0,
            u1: span.anchor + span.d1,
            first_node,
            z0: edge.position_rel_c(span.anchor, C64::new(span.d0, 0.0)) + corr,
            z1: edge.position_rel_c(span.anchor, C64::new(span.d1, 0.0)) + corr,
            corr,
        });
    }
    rebuild_star(&mut mesh);
    mesh
}

/// Build a mesh from absolute (edge, u0, u1) intervals.
pub fn mesh_from_panels(geom: &Arc<Geometry>, intervals: &[(usize, f64, f64)]) -> PanelMesh {
    let spans: Vec<PanelSpan> = intervals
        .iter()
        .map(|&(e, u0, u1)| PanelSpan::absolute(e, u0, u1))
        .collect();
    mesh_from_spans(geom, &spans, C64::new(0.0, 0.0))
}

fn rebuild_star(mesh: &mut PanelMesh) {
    let geom = mesh.geom.clone();
    for (v, vert) in geom.vertices.iter().enumerate() {
        let mut ends = Vec::with_capacity(vert.incident.len());
        for &(edge, end) in &vert.incident {
            // panels of this edge sorted by u
            let mut ids: Vec<usize> = (0..mesh.panels.len())
                .filter(|&p| mesh.panels[p].edge == edge)
                .collect();
            ids.sort_by(|&a, &b| {
                mesh.panels[a].u0.partial_cmp(&mesh.panels[b].u0).unwrap()
            });
            if ids.len() < 2 {
                continue;
            }
            let (outer, inner) = match end {
                End::Lo => (ids[1], ids[0]),
                End::Hi => (ids[ids.len() - 2], ids[ids.len() - 1]),
            };
            let param_width = (mesh.panels[outer].d1 - mesh.panels[outer].d0)
                + (mesh.panels[inner].d1 - mesh.panels[inner].d0);
            ends.push(StarEnd { edge, end, panels: [outer, inner], param_width });
        }
        mesh.star[v] = ends;
    }
}

/// Split [0, 1] into `n` sub-intervals of equal arclength along `edge`,
/// then equalize the parameter widths of the two intervals adjacent to
/// each singular end so dyadic refinement nests exactly.
fn edge_breakpoints(
    geom: &Geometry,
    edge_id: usize,
    n: usize,
    lo_singular: bool,
    hi_singular: bool,
) -> Vec<f64> {
    let edge = &geom.edges[edge_id];
    let total = arc_length_between(edge, 0.0, 1.0);
    let mut breaks = Vec::with_capacity(n + 1);
    breaks.push(0.0);
    let mut consumed = 0.0;
    let mut u_lo = 0.0;
    for j in 1..n {
        let target = total * j as f64 / n as f64 - consumed;
        // bracket and bisect s(u) = target on [u_lo, 1]
        let mut a = u_lo;
        let mut b = 1.0;
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            let s = arc_length_between(edge, u_lo, mid);
            if s < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let u = 0.5 * (a + b);
        consumed += arc_length_between(edge, u_lo, u);
        u_lo = u;
        breaks.push(u);
    }
    breaks.push(1.0);
    if lo_singular && n >= 2 {
        breaks[1] = 0.5 * breaks[2];
    }
    if hi_singular && n >= 2 {
        breaks[n - 1] = 0.5 * (breaks[n - 2] + 1.0);
    }
    breaks
}

/// Build the coarse mesh. Gamma* masks (two coarse panels per incident
/// edge-end) are recorded per vertex.
pub fn build_coarse_mesh(
    geom: &Arc<Geometry>,
    resolution: &Resolution,
    k: f64,
) -> Result<PanelMesh> {
    let lambda = std::f64::consts::TAU / k;
    let mut intervals = Vec::new();
    for (e, edge) in geom.edges.iter().enumerate() {
        let length = arc_length_between(edge, 0.0, 1.0);
        let n = match resolution {
            Resolution::PointsPerWavelength(ppw) => {
                let pts = ppw * length / lambda;
                ((pts / NODES_PER_PANEL as f64).round() as usize).max(1)
            }
            Resolution::UniformPanels(n) => *n,
            Resolution::PerEdgePanels(v) => *v.get(e).ok_or_else(|| {
                Error::Mesh(format!("per-edge panel list missing edge {e}"))
            })?,
        };
        let lo_singular = edge.v_lo.is_some();
        let hi_singular = edge.v_hi.is_some();
        let needed = 2 * (lo_singular as usize + hi_singular as usize);
        if n < needed.max(1) {
            return Err(Error::Mesh(format!(
                "edge {e} needs at least {} panels for its singular ends, got {n}",
                needed.max(1)
            )));
        }
        let breaks = edge_breakpoints(geom, e, n, lo_singular, hi_singular);
        for w in breaks.windows(2) {
            intervals.push((e, w[0], w[1]));
        }
    }
    Ok(mesh_from_panels(geom, &intervals))
}

fn vertex_anchor(end: End) -> f64 {
    match end {
        End::Lo => 0.0,
        End::Hi => 1.0,
    }
}

/// Dyadically refine the innermost panel toward `vertex`, `n_sub` times
/// per incident edge-end. All other panels are unchanged. Refined panels
/// are anchored at the vertex parameter so the dyadic offsets stay exact.
pub fn refine_toward(mesh: &PanelMesh, vertex: usize, n_sub: usize) -> PanelMesh {
    let mut spans: Vec<PanelSpan> = mesh
        .panels
        .iter()
        .map(|p| PanelSpan { edge: p.edge, anchor: p.anchor, d0: p.d0, d1: p.d1 })
        .collect();
    for se in &mesh.star[vertex] {
        let inner = &mesh.panels[se.panels[1]];
        let pos = spans
            .iter()
            .position(|s| {
                s.edge == inner.edge
                    && s.anchor + s.d0 == inner.u0
                    && s.anchor + s.d1 == inner.u1
            })
            .expect("inner star panel present");
        // re-anchor at the vertex: offsets measured away from the vertex
        let uv = vertex_anchor(se.end);
        let width = (spans[pos].d1 - spans[pos].d0).abs();
        let mut replacement = Vec::with_capacity(n_sub + 1);
        let mut w = width;
        for _ in 0..n_sub {
            // keep the outer half [w/2, w], recurse on [0, w/2]
            replacement.push(sub_span(inner.edge, uv, se.end, 0.5 * w, w));
            w *= 0.5;
        }
        replacement.push(sub_span(inner.edge, uv, se.end, 0.0, w));
        spans.splice(pos..pos + 1, replacement);
    }
    // keep panels sorted by (edge, u0) for deterministic ordering
    spans.sort_by(|a, b| {
        a.edge
            .cmp(&b.edge)
            .then((a.anchor + a.d0).partial_cmp(&(b.anchor + b.d0)).unwrap())
    });
    mesh_from_spans(&mesh.geom, &spans, mesh.origin)
}

// Span on `edge` between distances [near, far] from the vertex at `end`,
// oriented in increasing parameter.
fn sub_span(edge: usize, uv: f64, end: End, near: f64, far: f64) -> PanelSpan {
    match end {
        End::Lo => PanelSpan { edge, anchor: uv, d0: near, d1: far },
        End::Hi => PanelSpan { edge, anchor: uv, d0: -far, d1: -near },
    }
}

/// Refine toward every vertex.
pub fn refine_all(mesh: &PanelMesh, n_sub: usize) -> PanelMesh {
    let mut m = mesh.clone();
    for v in 0..mesh.geom.vertices.len() {
        m = refine_toward(&m, v, n_sub);
    }
    m
}

/// Local mesh variant used by the RCIP hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalVariant {
    /// Two panels per edge-end, relative widths (1/2, 1/2).
    TypeA,
    /// Three panels per edge-end, relative widths (1/2, 1/4, 1/4),
    /// innermost last.
    TypeB,
}

fn local_star_spans(
    mesh: &PanelMesh,
    vertex: usize,
    level: usize,
    n_sub: usize,
    variant: LocalVariant,
) -> Vec<PanelSpan> {
    assert!(level <= n_sub, "level {level} exceeds n_sub {n_sub}");
    let scale = 0.5f64.powi((n_sub - level) as i32);
    let mut spans = Vec::new();
    for se in &mesh.star[vertex] {
        let w = se.param_width * scale;
        let rel: &[f64] = match variant {
            LocalVariant::TypeA => &[1.0, 0.5],
            LocalVariant::TypeB => &[1.0, 0.5, 0.25],
        };
        let uv = vertex_anchor(se.end);
        for (idx, &outer_frac) in rel.iter().enumerate() {
            let inner_frac = if idx + 1 < rel.len() { rel[idx + 1] } else { 0.0 };
            spans.push(sub_span(se.edge, uv, se.end, inner_frac * w, outer_frac * w));
        }
    }
    spans
}

/// The mesh on the scaled subset Gamma*_i of a vertex: the portion of
/// Gamma* within parameter distance 2^(i - n_sub) * width of the vertex on
/// each incident edge, cut along the true curve. Panels are emitted per
/// incident edge-end in registry order, outer panel first. Node positions
/// are absolute; see [`local_gamma_star_mesh_rel`] for the vertex-centered
/// variant the RCIP recursion uses.
pub fn local_gamma_star_mesh(
    mesh: &PanelMesh,
    vertex: usize,
    level: usize,
    n_sub: usize,
    variant: LocalVariant,
) -> PanelMesh {
    let spans = local_star_spans(mesh, vertex, level, n_sub, variant);
    mesh_from_spans(&mesh.geom, &spans, C64::new(0.0, 0.0))
}

/// Same panels as [`local_gamma_star_mesh`], with all coordinates relative
/// to the vertex location, preserving full precision at any dyadic depth.
pub fn local_gamma_star_mesh_rel(
    mesh: &PanelMesh,
    vertex: usize,
    level: usize,
    n_sub: usize,
    variant: LocalVariant,
) -> PanelMesh {
    let spans = local_star_spans(mesh, vertex, level, n_sub, variant);
    let loc = mesh.geom.vertices[vertex].location;
    mesh_from_spans(&mesh.geom, &spans, C64::new(loc[0], loc[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometrySpec, VertexKind};

    #[test]
    fn segment_six_panels_is_96_nodes() {
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        assert_eq!(mesh.num_nodes(), 96);
        assert!((mesh.total_weight() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn segment_ppw_rule_matches_paper_count() {
        // L = 2, L/lambda = 50 => k = 2 pi * 25, N = 8 L/lambda = 400
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let k = std::f64::consts::PI * 50.0;
        let mesh = build_coarse_mesh(&g, &Resolution::PointsPerWavelength(8.0), k).unwrap();
        assert_eq!(mesh.panels.len(), 25);
        assert_eq!(mesh.num_nodes(), 400);
    }

    #[test]
    fn weights_sum_to_arclength_on_curved_edges() {
        let g = build_geometry(&GeometrySpec::Spiral).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(12), 3.0).unwrap();
        let exact = 26.0f64.sqrt() * (1.0f64.exp() - (-1.0f64).exp());
        assert!(((mesh.total_weight() - exact) / exact).abs() < 1e-12);
        // interior panels equal in arclength (the outermost pairs are
        // re-balanced in parameter for the refinement hierarchy)
        let lens: Vec<f64> = (0..12).map(|p| mesh.panel_arclength(p)).collect();
        let avg = exact / 12.0;
        for l in &lens[2..10] {
            assert!((l - avg).abs() / avg < 0.02, "panel length {l} vs {avg}");
        }
        for l in &lens {
            assert!((l - avg).abs() / avg < 0.5, "panel length {l} vs {avg}");
        }
    }

    #[test]
    fn star_masks_for_each_vertex_kind() {
        let g = build_geometry(&GeometrySpec::YShape).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        for (idx, v) in g.vertices.iter().enumerate() {
            let count = match v.kind {
                VertexKind::Endpoint => 1,
                VertexKind::Corner => 2,
                VertexKind::Branch(m) => m,
            };
            assert_eq!(mesh.star[idx].len(), count);
            assert_eq!(mesh.star_nodes(idx).len(), count * 2 * NODES_PER_PANEL);
        }
    }

    #[test]
    fn star_panels_have_equal_param_width() {
        let g = build_geometry(&GeometrySpec::Spiral).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(12), 3.0).unwrap();
        for star in &mesh.star {
            for se in star {
                let [outer, inner] = se.panels;
                let wo = mesh.panels[outer].d1 - mesh.panels[outer].d0;
                let wi = mesh.panels[inner].d1 - mesh.panels[inner].d0;
                assert!((wo - wi).abs() < 1e-15, "outer {wo} inner {wi}");
            }
        }
    }

    #[test]
    fn refine_counts_and_dyadic_widths() {
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let refined = refine_toward(&mesh, 0, 0);
        assert_eq!(refined.panels.len(), 6);
        let refined = refine_toward(&mesh, 0, 3);
        assert_eq!(refined.panels.len(), 9);
        let refined = refine_toward(&mesh, 0, 10);
        // innermost width is 2^-10 of the original
        let w0 = mesh.panels[0].d1 - mesh.panels[0].d0;
        let mut widths: Vec<f64> = refined
            .panels
            .iter()
            .filter(|p| p.edge == 0)
            .map(|p| p.d1 - p.d0)
            .collect();
        widths.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(widths[0], w0 * 0.5f64.powi(10));
    }

    #[test]
    fn refinement_survives_extreme_depth() {
        // at n_sub = 80 the innermost offsets are ~1e-25; the relative
        // parametrization keeps node spacing meaningful
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let refined = refine_toward(&mesh, 0, 80);
        let innermost = refined
            .panels
            .iter()
            .min_by(|a, b| (a.d1 - a.d0).partial_cmp(&(b.d1 - b.d0)).unwrap())
            .unwrap();
        let w = innermost.d1 - innermost.d0;
        assert!(w > 0.0 && w < 1e-24);
        // widths are exact powers of two times the original
        let w0 = mesh.panels[0].d1 - mesh.panels[0].d0;
        assert_eq!(w, w0 * 0.5f64.powi(80));
    }

    #[test]
    fn refine_then_merge_recovers_boundaries() {
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let refined = refine_toward(&mesh, 0, 7);
        // the union of refined boundaries must contain the original
        // boundaries bit-for-bit
        let orig: Vec<f64> = mesh.panels.iter().map(|p| p.u0).collect();
        let fine: Vec<f64> = refined.panels.iter().map(|p| p.u0).collect();
        for u in orig {
            assert!(fine.iter().any(|&v| v == u), "boundary {u} lost");
        }
    }

    #[test]
    fn local_meshes_match_spec_counts() {
        let g = build_geometry(&GeometrySpec::OneCorner).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let corner = g
            .vertices
            .iter()
            .position(|v| v.kind == VertexKind::Corner)
            .unwrap();
        let b = local_gamma_star_mesh(&mesh, corner, 5, 10, LocalVariant::TypeB);
        assert_eq!(b.panels.len(), 6);
        assert_eq!(b.num_nodes(), 96);
        let a = local_gamma_star_mesh(&mesh, corner, 5, 10, LocalVariant::TypeA);
        assert_eq!(a.panels.len(), 4);
        // outermost panels of type-a and type-b span the same sub-arc
        assert_eq!(a.panels[0].d0, b.panels[0].d0);
        assert_eq!(a.panels[0].d1, b.panels[0].d1);
        // branch(3): 9 panels, 144 nodes
        let gy = build_geometry(&GeometrySpec::YShape).unwrap();
        let meshy = build_coarse_mesh(&gy, &Resolution::UniformPanels(6), 3.0).unwrap();
        let branch = gy
            .vertices
            .iter()
            .position(|v| matches!(v.kind, VertexKind::Branch(_)))
            .unwrap();
        let by = local_gamma_star_mesh(&meshy, branch, 2, 4, LocalVariant::TypeB);
        assert_eq!(by.panels.len(), 9);
        assert_eq!(by.num_nodes(), 144);
    }

    #[test]
    fn top_level_type_a_is_the_coarse_star_grid() {
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let a = local_gamma_star_mesh(&mesh, 0, 40, 40, LocalVariant::TypeA);
        let star_nodes = mesh.star_nodes(0);
        assert_eq!(a.num_nodes(), star_nodes.len());
        // same node positions up to rounding of the anchored evaluation
        let mut sorted: Vec<usize> = star_nodes.clone();
        sorted.sort_by(|&i, &j| mesh.param[i].partial_cmp(&mesh.param[j]).unwrap());
        let mut local: Vec<usize> = (0..a.num_nodes()).collect();
        local.sort_by(|&i, &j| a.param[i].partial_cmp(&a.param[j]).unwrap());
        for (li, gi) in local.iter().zip(&sorted) {
            assert!((a.z[*li] - mesh.z[*gi]).norm() < 1e-14);
        }
    }

    #[test]
    fn relative_local_mesh_keeps_precision_at_depth() {
        let g = build_geometry(&GeometrySpec::OneCorner).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
        let corner = g
            .vertices
            .iter()
            .position(|v| v.kind == VertexKind::Corner)
            .unwrap();
        let local = local_gamma_star_mesh_rel(&mesh, corner, 1, 60, LocalVariant::TypeB);
        // all nodes within ~2^-59 of the vertex, nonzero, distinct
        for i in 0..local.num_nodes() {
            let d = local.z[i].norm();
            assert!(d > 0.0 && d < 1e-15, "node {i} at distance {d}");
        }
        for p in &local.panels {
            let w = (p.z1 - p.z0).norm();
            assert!(w > 0.0);
            // node spacing resolves the panel: distinct consecutive nodes
            for j in p.first_node + 1..p.first_node + NODES_PER_PANEL {
                assert!((local.z[j] - local.z[j - 1]).norm() > 1e-3 * w / 16.0);
            }
        }
    }

    #[test]
    fn meshes_are_bit_for_bit_reproducible() {
        let g = build_geometry(&GeometrySpec::OneCorner).unwrap();
        let m1 = build_coarse_mesh(&g, &Resolution::UniformPanels(8), 5.0).unwrap();
        let m2 = build_coarse_mesh(&g, &Resolution::UniformPanels(8), 5.0).unwrap();
        assert_eq!(m1.z, m2.z);
        assert_eq!(m1.weight, m2.weight);
    }

    #[test]
    fn too_few_panels_is_an_error() {
        let g = build_geometry(&GeometrySpec::Segment).unwrap();
        let err = build_coarse_mesh(&g, &Resolution::UniformPanels(3), 3.0);
        assert!(err.is_err());
        let msg = format!("{}", err.err().unwrap());
        assert!(msg.contains("edge 0"), "{msg}");
    }
}
