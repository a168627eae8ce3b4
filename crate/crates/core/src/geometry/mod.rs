//! Parametrized edge curves, the singular-point registry, and composite
//! panel meshes, including the local grids the RCIP recursion runs on.
//!
//! Every edge is parametrized over u in [0, 1]. Normals are the unit
//! tangent rotated by -pi/2, following each edge's own parametrization.
//! Geometry and meshes are immutable after construction.

mod mesh;

pub use mesh::{
    build_coarse_mesh, local_gamma_star_mesh, local_gamma_star_mesh_rel, mesh_from_panels,
    mesh_from_spans, refine_all, refine_toward,
    LocalVariant, Panel, PanelMesh, PanelSpan, Resolution, StarEnd, NODES_PER_PANEL,
};

use crate::specfun::adaptive_quadrature;
use crate::{Error, Result, C64};
use std::sync::Arc;

/// Which end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Lo,
    Hi,
}

/// Classification of a singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Endpoint,
    Corner,
    Branch(usize),
}

/// An endpoint, corner, or branch vertex with its incident edge-ends.
#[derive(Debug, Clone)]
pub struct SingularPoint {
    pub location: [f64; 2],
    pub kind: VertexKind,
    pub incident: Vec<(usize, End)>,
    /// Refinement depth toward this vertex; a solver parameter recorded
    /// here once a solve is configured.
    pub n_sub: usize,
}

/// The base shapes an edge can take.
#[derive(Debug, Clone)]
pub enum CurveKind {
    /// Straight segment from p0 to p1.
    Line { p0: [f64; 2], p1: [f64; 2] },
    /// (s, s^2) for s in [0, 1].
    Parabola,
    /// (1 + pi s/2, cos(pi s/2)) for s in [0, 1]; starts at (1, 1).
    CosineArc,
    /// (e^s cos 5s, e^s sin 5s) for s in [-1, 1].
    LogSpiral,
    /// Closed circle, positively oriented.
    Circle { center: [f64; 2], radius: f64 },
}

/// One smooth arc: a base shape, a similarity transform, an orientation
/// flag, and the ids of the vertices at its ends (closed curves have none).
#[derive(Debug, Clone)]
pub struct EdgeCurve {
    pub kind: CurveKind,
    /// z -> rot_scale * z + translate applied after the base map.
    pub rot_scale: C64,
    pub translate: C64,
    pub reversed: bool,
    pub closed: bool,
    pub v_lo: Option<usize>,
    pub v_hi: Option<usize>,
}

impl EdgeCurve {
    pub fn new(kind: CurveKind) -> Self {
        let closed = matches!(kind, CurveKind::Circle { .. });
        EdgeCurve {
            kind,
            rot_scale: C64::new(1.0, 0.0),
            translate: C64::new(0.0, 0.0),
            reversed: false,
            closed,
            v_lo: None,
            v_hi: None,
        }
    }

    pub fn translated(mut self, t: [f64; 2]) -> Self {
        self.translate += C64::new(t[0], t[1]);
        self
    }

    /// Flip the parametrization direction (and hence the normal).
    pub fn reverse(&mut self) {
        self.reversed = !self.reversed;
        std::mem::swap(&mut self.v_lo, &mut self.v_hi);
    }

    fn base_position(&self, u: C64) -> C64 {
        match &self.kind {
            CurveKind::Line { p0, p1 } => {
                let z0 = C64::new(p0[0], p0[1]);
                let z1 = C64::new(p1[0], p1[1]);
                z0 + u * (z1 - z0)
            }
            CurveKind::Parabola => u + C64::i() * u * u,
            CurveKind::CosineArc => {
                let h = std::f64::consts::FRAC_PI_2 * u;
                C64::new(1.0, 0.0) + h + C64::i() * h.cos()
            }
            CurveKind::LogSpiral => {
                let s = -C64::new(1.0, 0.0) + 2.0 * u;
                (C64::new(1.0, 5.0) * s).exp()
            }
            CurveKind::Circle { center, radius } => {
                C64::new(center[0], center[1])
                    + radius * (C64::i() * std::f64::consts::TAU * u).exp()
            }
        }
    }

    fn base_velocity(&self, u: C64) -> C64 {
        match &self.kind {
            CurveKind::Line { p0, p1 } => C64::new(p1[0] - p0[0], p1[1] - p0[1]),
            CurveKind::Parabola => C64::new(1.0, 0.0) + 2.0 * C64::i() * u,
            CurveKind::CosineArc => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                let h = half_pi * u;
                half_pi * (C64::new(1.0, 0.0) - C64::i() * h.sin())
            }
            CurveKind::LogSpiral => {
                let s = -C64::new(1.0, 0.0) + 2.0 * u;
                2.0 * C64::new(1.0, 5.0) * (C64::new(1.0, 5.0) * s).exp()
            }
            CurveKind::Circle { radius, .. } => {
                let w = C64::i() * std::f64::consts::TAU;
                radius * w * (w * C64::new(1.0, 0.0) * u).exp()
            }
        }
    }

    fn base_position_rel(&self, a: f64, h: C64) -> C64 {
        match &self.kind {
            CurveKind::Line { p0, p1 } => h * C64::new(p1[0] - p0[0], p1[1] - p0[1]),
            CurveKind::Parabola => h + C64::i() * h * (2.0 * a + h),
            CurveKind::CosineArc => {
                // cos(A) - cos(B) = -2 sin((A+B)/2) sin((A-B)/2)
                let half_pi = std::f64::consts::FRAC_PI_2;
                let mid = half_pi * (a + 0.5 * h);
                half_pi * h - 2.0 * C64::i() * mid.sin() * (0.5 * half_pi * h).sin()
            }
            CurveKind::LogSpiral => {
                let c = C64::new(1.0, 5.0);
                let sa = -1.0 + 2.0 * a;
                (c * sa).exp() * expm1_c(c * 2.0 * h)
            }
            CurveKind::Circle { radius, .. } => {
                let w = C64::i() * std::f64::consts::TAU;
                radius * (w * a).exp() * expm1_c(w * h)
            }
        }
    }

    /// Complexified position at (possibly complex) parameter u.
    pub fn position_c(&self, u: C64) -> C64 {
        let u = if self.reversed { C64::new(1.0, 0.0) - u } else { u };
        self.rot_scale * self.base_position(u) + self.translate
    }

    /// position(anchor + du) - position(anchor), evaluated with full
    /// relative precision even for du far below the rounding scale of the
    /// anchor. This is what keeps the deep levels of the dyadic refinement
    /// hierarchy meaningful.
    pub fn position_rel_c(&self, anchor: f64, du: C64) -> C64 {
        if self.reversed {
            self.rot_scale * self.base_position_rel(1.0 - anchor, -du)
        } else {
            self.rot_scale * self.base_position_rel(anchor, du)
        }
    }

    /// d(position)/du at (possibly complex) parameter u.
    pub fn velocity_c(&self, u: C64) -> C64 {
        let (u, sign) = if self.reversed {
            (C64::new(1.0, 0.0) - u, -1.0)
        } else {
            (u, 1.0)
        };
        sign * self.rot_scale * self.base_velocity(u)
    }

    pub fn position(&self, u: f64) -> C64 {
        self.position_c(C64::new(u, 0.0))
    }

    pub fn velocity(&self, u: f64) -> C64 {
        self.velocity_c(C64::new(u, 0.0))
    }

    /// Unit normal (tangent rotated by -pi/2) as a complex number.
    pub fn normal(&self, u: f64) -> C64 {
        let v = self.velocity(u);
        -C64::i() * v / v.norm()
    }
}

// exp(w) - 1 without cancellation for small w.
fn expm1_c(w: C64) -> C64 {
    let re = w.re.exp_m1() * w.im.cos() - 2.0 * (0.5 * w.im).sin().powi(2);
    let im = w.re.exp() * w.im.sin();
    C64::new(re, im)
}

/// Arc length of the sub-interval [u0, u1] of an edge, by adaptive
/// quadrature to 1e-12 relative.
pub fn arc_length_between(edge: &EdgeCurve, u0: f64, u1: f64) -> f64 {
    adaptive_quadrature(|u| edge.velocity(u).norm(), u0, u1, 1e-13)
}

/// Arc length of a whole edge.
pub fn arc_length(edge: &EdgeCurve) -> f64 {
    arc_length_between(edge, 0.0, 1.0)
}

/// A named built-in shape or an explicit polyline network.
#[derive(Debug, Clone)]
pub enum GeometrySpec {
    /// The straight segment (s, -0.2), s in [-1, 1].
    Segment,
    /// The logarithmic spiral (e^s cos 5s, e^s sin 5s), s in [-1, 1].
    Spiral,
    /// Parabola joined to a falling cosine arc at the corner (1, 1).
    OneCorner,
    /// `copies` horizontal tiles of the one-corner curve (4 gives eight
    /// corners).
    CornerTiling { copies: usize },
    /// Three segments with lengths 10, 8, 8 and a top opening angle pi/2.
    YShape,
    /// Recursive bifurcating tree; `levels` counts bifurcation generations
    /// (3 gives the seven-branch curve with nine endpoints). Lengths shrink
    /// by 0.8 and opening angles divide by 1.1 per generation.
    Tree { levels: usize },
    /// Closed circle (no singular points).
    Circle { center: [f64; 2], radius: f64 },
    /// Straight segments between listed points.
    Polyline { points: Vec<[f64; 2]>, edges: Vec<(usize, usize)> },
}

/// Edges plus the complete vertex registry.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub edges: Vec<EdgeCurve>,
    pub vertices: Vec<SingularPoint>,
}

impl Geometry {
    pub fn total_arc_length(&self) -> f64 {
        self.edges.iter().map(arc_length).sum()
    }
}

/// Build edges and the vertex registry from a spec. Free ends become
/// endpoint vertices; shared ends become corners or branch points by
/// incidence count. Ends are considered shared when within 1e-10.
pub fn build_geometry(spec: &GeometrySpec) -> Result<Arc<Geometry>> {
    let edges = match spec {
        GeometrySpec::Segment => {
            vec![EdgeCurve::new(CurveKind::Line { p0: [-1.0, -0.2], p1: [1.0, -0.2] })]
        }
        GeometrySpec::Spiral => vec![EdgeCurve::new(CurveKind::LogSpiral)],
        GeometrySpec::OneCorner => one_corner_edges([0.0, 0.0]),
        GeometrySpec::CornerTiling { copies } => {
            if *copies == 0 {
                return Err(Error::Geometry("tiling needs at least one copy".into()));
            }
            let width = 1.0 + std::f64::consts::FRAC_PI_2;
            let mut edges = Vec::new();
            for i in 0..*copies {
                edges.extend(one_corner_edges([width * i as f64, 0.0]));
            }
            edges
        }
        GeometrySpec::YShape => {
            let trunk_top = [0.0, 10.0];
            let arm = 8.0 * std::f64::consts::FRAC_PI_4.sin();
            let arm_y = 10.0 + 8.0 * std::f64::consts::FRAC_PI_4.cos();
            vec![
                EdgeCurve::new(CurveKind::Line { p0: [0.0, 0.0], p1: trunk_top }),
                EdgeCurve::new(CurveKind::Line { p0: trunk_top, p1: [-arm, arm_y] }),
                EdgeCurve::new(CurveKind::Line { p0: trunk_top, p1: [arm, arm_y] }),
            ]
        }
        GeometrySpec::Tree { levels } => tree_edges(*levels),
        GeometrySpec::Circle { center, radius } => {
            if !(*radius > 0.0) {
                return Err(Error::Geometry("circle radius must be positive".into()));
            }
            vec![EdgeCurve::new(CurveKind::Circle { center: *center, radius: *radius })]
        }
        GeometrySpec::Polyline { points, edges } => {
            let mut out = Vec::with_capacity(edges.len());
            for &(a, b) in edges {
                let (p0, p1) = (
                    *points.get(a).ok_or_else(|| {
                        Error::Geometry(format!("polyline point index {a} out of range"))
                    })?,
                    *points.get(b).ok_or_else(|| {
                        Error::Geometry(format!("polyline point index {b} out of range"))
                    })?,
                );
                if a == b {
                    return Err(Error::Geometry("degenerate polyline edge".into()));
                }
                out.push(EdgeCurve::new(CurveKind::Line { p0, p1 }));
            }
            out
        }
    };
    assemble_geometry(edges)
}

fn one_corner_edges(offset: [f64; 2]) -> Vec<EdgeCurve> {
    vec![
        EdgeCurve::new(CurveKind::Parabola).translated(offset),
        EdgeCurve::new(CurveKind::CosineArc).translated(offset),
    ]
}

fn tree_edges(levels: usize) -> Vec<EdgeCurve> {
    let mut edges = vec![EdgeCurve::new(CurveKind::Line { p0: [0.0, 0.0], p1: [0.0, 10.0] })];
    // (tip, direction angle from +y axis, current length, current opening)
    let mut frontier = vec![([0.0f64, 10.0f64], 0.0f64)];
    let mut length = 8.0;
    let mut opening = std::f64::consts::FRAC_PI_2;
    for _ in 0..levels {
        let mut next = Vec::new();
        for &(tip, dir) in &frontier {
            for sign in [-1.0, 1.0] {
                let ang = dir + sign * opening / 2.0;
                let end = [tip[0] + length * ang.sin(), tip[1] + length * ang.cos()];
                edges.push(EdgeCurve::new(CurveKind::Line { p0: tip, p1: end }));
                next.push((end, ang));
            }
        }
        frontier = next;
        length *= 0.8;
        opening /= 1.1;
    }
    edges
}

/// Cluster edge ends into vertices and classify them.
pub fn assemble_geometry(mut edges: Vec<EdgeCurve>) -> Result<Arc<Geometry>> {
    const MERGE_TOL: f64 = 1e-10;
    let mut locations: Vec<[f64; 2]> = Vec::new();
    let mut members: Vec<Vec<(usize, End)>> = Vec::new();

    let mut ends: Vec<(usize, End, C64)> = Vec::new();
    for (i, e) in edges.iter().enumerate() {
        if e.closed {
            continue;
        }
        ends.push((i, End::Lo, e.position(0.0)));
        ends.push((i, End::Hi, e.position(1.0)));
    }
    for (edge, end, z) in ends {
        let p = [z.re, z.im];
        let found = locations
            .iter()
            .position(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() <= MERGE_TOL);
        match found {
            Some(v) => {
                let q = locations[v];
                let d = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                if d > 1e-13 * (1.0 + q[0].abs() + q[1].abs()) {
                    return Err(Error::Geometry(format!(
                        "edge ends near ({}, {}) differ by {d:e}",
                        q[0], q[1]
                    )));
                }
                members[v].push((edge, end));
            }
            None => {
                locations.push(p);
                members.push(vec![(edge, end)]);
            }
        }
    }

    let mut vertices = Vec::with_capacity(locations.len());
    for (v, (loc, inc)) in locations.into_iter().zip(members.into_iter()).enumerate() {
        let kind = match inc.len() {
            1 => VertexKind::Endpoint,
            2 => VertexKind::Corner,
            m => VertexKind::Branch(m),
        };
        for &(e, end) in &inc {
            match end {
                End::Lo => edges[e].v_lo = Some(v),
                End::Hi => edges[e].v_hi = Some(v),
            }
        }
        vertices.push(SingularPoint { location: loc, kind, incident: inc, n_sub: 0 });
    }

    Ok(Arc::new(Geometry { edges, vertices }))
}
