//! Nystrom matrix assembly: a dense smooth part from plain Gauss-Legendre
//! panels, a sparse quadrature-correction part for targets in the near
//! zone of a source panel, and a sparse star part holding the smooth-rule
//! entries between Gamma*-panel pairs at each singular point.
//!
//! The corrected operator splits as in the complexity decomposition
//! `full = (smooth - star + qc) + star`: the circ part is what the global
//! solve applies; the star interactions live inside the compressed
//! inverses of [`crate::rcip`].

mod moments;

pub use moments::{locate_preimage, target_context, TargetContext};

use crate::geometry::{PanelMesh, NODES_PER_PANEL};
use crate::kernels::{kernel, kernel_split, kernel_split_diag, KernelPoint, OpKind, SourcePoint, TargetPoint};
use crate::linalg::CMat;
use crate::specfun::gauss_legendre_16;
use crate::{Error, Result, C64};
use rayon::prelude::*;
use std::collections::HashMap;

const N: usize = NODES_PER_PANEL;

/// Near-zone radius: a target needs quadrature correction for a source
/// panel when it lies within this multiple of the panel arclength of the
/// panel midpoint (the panel itself and its parameter neighbors always
/// count as near for on-surface targets).
pub const NEAR_ZONE_FACTOR: f64 = 1.2;

/// Sparse row-compressed corrections.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    pub rows: Vec<Vec<(u32, C64)>>,
}

impl SparseRows {
    fn new(n: usize) -> Self {
        SparseRows { rows: vec![Vec::new(); n] }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn add_to(&self, x: &[C64], y: &mut [C64], sign: f64) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(j, v) in row {
                acc += v * x[j as usize];
            }
            y[i] += sign * acc;
        }
    }
}

/// Discrete S, K, K^A, or T on a mesh: smooth part, quadrature
/// corrections, and the star block.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub op: OpKind,
    pub k: f64,
    pub smooth: CMat,
    pub qc: SparseRows,
    pub star: SparseRows,
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.smooth.nrows
    }

    /// Apply the circ part: smooth - star + qc.
    pub fn apply_circ(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.smooth.matvec_par(x);
        self.qc.add_to(x, &mut y, 1.0);
        self.star.add_to(x, &mut y, -1.0);
        y
    }

    /// Apply the fully corrected operator. Only valid when the mesh has no
    /// singular points (the star-internal interactions are then empty).
    pub fn apply_full(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.star.nnz(), 0, "apply_full with a nonempty star part");
        let mut y = self.smooth.matvec_par(x);
        self.qc.add_to(x, &mut y, 1.0);
        y
    }
}

/// Map each target to the source panels whose near zone contains it,
/// using a uniform grid over panel midpoints so the cost is proportional
/// to targets + panels for quasi-uniform distributions.
pub fn near_targets(mesh: &PanelMesh, targets: &[C64]) -> Vec<Vec<usize>> {
    let np = mesh.panels.len();
    let radii: Vec<f64> = (0..np)
        .map(|p| NEAR_ZONE_FACTOR * mesh.panel_arclength(p))
        .collect();
    let mids: Vec<C64> = (0..np).map(|p| mesh.panel_midpoint(p)).collect();
    let h = radii.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let key = |z: C64| -> (i64, i64) { ((z.re / h).floor() as i64, (z.im / h).floor() as i64) };
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for p in 0..np {
        grid.entry(key(mids[p])).or_default().push(p);
    }
    targets
        .par_iter()
        .map(|&z| {
            let (cx, cy) = key(z);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(cx + dx, cy + dy)) {
                        for &p in list {
                            if (z - mids[p]).norm() < radii[p] {
                                out.push(p);
                            }
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

// Parameter-adjacent panels on the same edge (wrapping on closed edges).
fn panel_neighbors(mesh: &PanelMesh) -> Vec<Vec<usize>> {
    let np = mesh.panels.len();
    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for p in 0..np {
        by_edge.entry(mesh.panels[p].edge).or_default().push(p);
    }
    let mut nbrs = vec![Vec::new(); np];
    for (edge, mut ids) in by_edge {
        ids.sort_by(|&a, &b| mesh.panels[a].u0.partial_cmp(&mesh.panels[b].u0).unwrap());
        let m = ids.len();
        let closed = mesh.geom.edges[edge].closed;
        for (pos, &p) in ids.iter().enumerate() {
            if pos > 0 {
                nbrs[p].push(ids[pos - 1]);
            } else if closed && m > 1 {
                nbrs[p].push(ids[m - 1]);
            }
            if pos + 1 < m {
                nbrs[p].push(ids[pos + 1]);
            } else if closed && m > 1 {
                nbrs[p].push(ids[0]);
            }
        }
    }
    nbrs
}

// Near panels for every mesh node: distance rule plus self plus neighbors.
fn near_panels_for_nodes(mesh: &PanelMesh) -> Vec<Vec<usize>> {
    let mut near = near_targets(mesh, &mesh.z);
    let nbrs = panel_neighbors(mesh);
    let node_panel = node_panel_map(mesh);
    for (i, list) in near.iter_mut().enumerate() {
        let own = node_panel[i];
        list.push(own);
        list.extend_from_slice(&nbrs[own]);
        list.sort_unstable();
        list.dedup();
    }
    near
}

fn node_panel_map(mesh: &PanelMesh) -> Vec<usize> {
    let mut map = vec![0usize; mesh.num_nodes()];
    for (p, panel) in mesh.panels.iter().enumerate() {
        for i in panel.nodes() {
            map[i] = p;
        }
    }
    map
}

/// Fully corrected contribution coefficients of one source panel at one
/// target: 16 complex values multiplying the density samples.
pub fn corrected_row(
    mesh: &PanelMesh,
    panel: usize,
    target: &TargetPoint,
    ctx: &TargetContext,
    op: OpKind,
    k: f64,
) -> Result<[C64; N]> {
    let p = &mesh.panels[panel];
    let rule = gauss_legendre_16();
    let mut row = [C64::new(0.0, 0.0); N];
    let i_unit = C64::i();
    for j in 0..N {
        let gj = p.first_node + j;
        let src = SourcePoint { z: mesh.z[gj], normal: mesh.normal[gj], dz: mesh.dz[gj] };
        let split = if ctx.coincident == Some(j) {
            kernel_split_diag(op, &src, k)?
        } else {
            kernel_split(op, &KernelPoint { source: src, target: *target }, k)?
        };
        let speed = mesh.speed[gj];
        let glw = rule.weights[j];
        let mut c = split.g0 * (glw * speed);
        c += split.gl * ((ctx.w_log[j] + glw * ctx.ln_psi_abs[j]) * speed);
        if split.gc != C64::new(0.0, 0.0) {
            let gamma = split.gc * src.dz / (i_unit * ctx.psi[j]);
            c += split.c_c * (ctx.w_cau[j] * gamma).re;
        }
        if split.gh != C64::new(0.0, 0.0) {
            let h = split.gh * src.dz / (i_unit * ctx.psi[j] * ctx.psi[j]);
            c += split.c_h * (ctx.w_hyp[j] * h).re;
        }
        row[j] = c;
    }
    Ok(row)
}

// Plain Gauss-Legendre contribution of one panel at a target, with the
// coincident node (if any) zeroed.
fn plain_row(
    mesh: &PanelMesh,
    panel: usize,
    target: &TargetPoint,
    skip: Option<usize>,
    op: OpKind,
    k: f64,
) -> Result<[C64; N]> {
    let p = &mesh.panels[panel];
    let mut row = [C64::new(0.0, 0.0); N];
    for j in 0..N {
        if skip == Some(j) {
            continue;
        }
        let gj = p.first_node + j;
        let src = SourcePoint { z: mesh.z[gj], normal: mesh.normal[gj], dz: mesh.dz[gj] };
        row[j] = kernel(op, &KernelPoint { source: src, target: *target }, k)? * mesh.weight[gj];
    }
    Ok(row)
}

fn node_target(mesh: &PanelMesh, i: usize) -> TargetPoint {
    TargetPoint { z: mesh.z[i], normal: Some(mesh.normal[i]) }
}

/// Assemble the discrete operator with the circ/star decomposition the
/// reduced system needs. Deterministic: corrections are computed
/// independently per (target, panel) pair and written to disjoint rows.
pub fn assemble(op: OpKind, mesh: &PanelMesh, k: f64) -> Result<OperatorSet> {
    let n = mesh.num_nodes();
    let mut smooth = CMat::zeros(n, n);
    smooth
        .data
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let tgt = node_target(mesh, i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let src = SourcePoint { z: mesh.z[j], normal: mesh.normal[j], dz: mesh.dz[j] };
                row[j] =
                    kernel(op, &KernelPoint { source: src, target: tgt }, k)? * mesh.weight[j];
            }
            Ok(())
        })?;

    let near = near_panels_for_nodes(mesh);
    let node_panel = node_panel_map(mesh);
    let star_vertex = mesh.star_panel_flags();

    let qc_rows: Vec<Vec<(u32, C64)>> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Vec<(u32, C64)>> {
            let tgt = node_target(mesh, i);
            let mut row = Vec::new();
            for &p in &near[i] {
                // star-internal pairs are handled inside R, not by qc
                if let (Some(v1), Some(v2)) = (star_vertex[node_panel[i]], star_vertex[p]) {
                    if v1 == v2 {
                        continue;
                    }
                }
                let panel = &mesh.panels[p];
                let hint = if node_panel[i] == p { Some(i - panel.first_node) } else { None };
                let Some(ctx) = target_context(mesh, p, mesh.z[i], hint, true) else {
                    debug_assert!(false, "near-pair preimage search failed");
                    continue;
                };
                let corrected = corrected_row(mesh, p, &tgt, &ctx, op, k)?;
                for j in 0..N {
                    let gj = panel.first_node + j;
                    let plain = if gj == i { C64::new(0.0, 0.0) } else { smooth[(i, gj)] };
                    row.push((gj as u32, corrected[j] - plain));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut qc = SparseRows::new(n);
    qc.rows = qc_rows;

    let mut star = SparseRows::new(n);
    for ends in &mesh.star {
        let mut panels: Vec<usize> = Vec::new();
        for se in ends {
            panels.extend_from_slice(&se.panels);
        }
        for &pa in &panels {
            for i in mesh.panels[pa].nodes() {
                for &pb in &panels {
                    for j in mesh.panels[pb].nodes() {
                        if i != j {
                            star.rows[i].push((j as u32, smooth[(i, j)]));
                        }
                    }
                }
            }
        }
    }
    for row in star.rows.iter_mut() {
        row.sort_unstable_by_key(|&(j, _)| j);
    }

    Ok(OperatorSet { op, k, smooth, qc, star })
}

/// Dense fully corrected Nystrom matrix (no star exclusion). Used for the
/// local systems of the RCIP recursion and for small verification solves.
pub fn assemble_dense_full(op: OpKind, mesh: &PanelMesh, k: f64) -> Result<CMat> {
    let n = mesh.num_nodes();
    let near = near_panels_for_nodes(mesh);
    let node_panel = node_panel_map(mesh);
    let mut mat = CMat::zeros(n, n);
    mat.data
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, row)| -> Result<()> {
            let tgt = node_target(mesh, i);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let src = SourcePoint { z: mesh.z[j], normal: mesh.normal[j], dz: mesh.dz[j] };
                row[j] =
                    kernel(op, &KernelPoint { source: src, target: tgt }, k)? * mesh.weight[j];
            }
            for &p in &near[i] {
                let panel = &mesh.panels[p];
                let hint = if node_panel[i] == p { Some(i - panel.first_node) } else { None };
                let Some(ctx) = target_context(mesh, p, mesh.z[i], hint, true) else {
                    debug_assert!(false, "near-pair preimage search failed");
                    continue;
                };
                let corrected = corrected_row(mesh, p, &tgt, &ctx, op, k)?;
                row[panel.first_node..panel.first_node + N].copy_from_slice(&corrected);
            }
            Ok(())
        })?;
    Ok(mat)
}

/// Product-integration stencil for one (target, panel) pair: weights w
/// with sum_j w_j f(t_j) = int_panel f(t) chi(t, z) dt for polynomials f
/// of degree <= 15 in the complexified coordinate, per singular factor
/// chi. On-panel targets get principal-value / finite-part weights.
#[derive(Debug, Clone)]
pub struct CorrectionStencil {
    pub target: C64,
    pub panel: usize,
    pub log: [C64; N],
    pub cauchy: [C64; N],
    pub hyper: [C64; N],
}

fn weights_context(mesh: &PanelMesh, panel: usize, z: C64) -> Result<TargetContext> {
    let p = &mesh.panels[panel];
    let scale = (p.z1 - p.z0).norm();
    for j in 0..N {
        if (mesh.z[p.first_node + j] - z).norm() < 1e-14 * (1.0 + scale) {
            return Err(Error::Quadrature(
                "target coincides with a quadrature node; use the diagonal-limit path".into(),
            ));
        }
    }
    target_context(mesh, panel, z, None, true).ok_or_else(|| {
        Error::Quadrature("no parameter preimage found for target near panel".into())
    })
}

/// Weights for `int_panel f(t) log|tau(t) - z| dt`.
pub fn product_weights_log(mesh: &PanelMesh, panel: usize, z: C64) -> Result<[C64; N]> {
    let ctx = weights_context(mesh, panel, z)?;
    let rule = gauss_legendre_16();
    let p = &mesh.panels[panel];
    let mut w = [C64::new(0.0, 0.0); N];
    for j in 0..N {
        w[j] = (ctx.w_log[j] + rule.weights[j] * ctx.ln_psi_abs[j]) * mesh.dz[p.first_node + j];
    }
    Ok(w)
}

/// Weights for `int_panel f(t)/(t - z) dt` (principal value on-panel).
pub fn product_weights_cauchy(mesh: &PanelMesh, panel: usize, z: C64) -> Result<[C64; N]> {
    let ctx = weights_context(mesh, panel, z)?;
    let p = &mesh.panels[panel];
    let mut w = [C64::new(0.0, 0.0); N];
    for j in 0..N {
        w[j] = ctx.w_cau[j] * mesh.dz[p.first_node + j] / ctx.psi[j];
    }
    Ok(w)
}

/// Weights for `int_panel f(t)/(t - z)^2 dt` (finite part on-panel).
pub fn product_weights_hyper(mesh: &PanelMesh, panel: usize, z: C64) -> Result<[C64; N]> {
    let ctx = weights_context(mesh, panel, z)?;
    let p = &mesh.panels[panel];
    let mut w = [C64::new(0.0, 0.0); N];
    for j in 0..N {
        w[j] = ctx.w_hyp[j] * mesh.dz[p.first_node + j] / (ctx.psi[j] * ctx.psi[j]);
    }
    Ok(w)
}

/// All three channel stencils for one (target, panel) pair.
pub fn correction_stencil(mesh: &PanelMesh, panel: usize, z: C64) -> Result<CorrectionStencil> {
    Ok(CorrectionStencil {
        target: z,
        panel,
        log: product_weights_log(mesh, panel, z)?,
        cauchy: product_weights_cauchy(mesh, panel, z)?,
        hyper: product_weights_hyper(mesh, panel, z)?,
    })
}
