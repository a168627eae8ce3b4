//! Recursively compressed inverse preconditioning.
//!
//! Each singular point gets a compressed inverse R: the lossless
//! compression to the coarse Gamma* grid of the inverse of (I + G*)
//! discretized on the dyadically refined fine grid, where G* is the 2x2
//! block [[-I*, A*], [B*, 0]] of the preconditioned system. R is built by
//! a forward recursion over a hierarchy of local grids: level 1 inverts
//! the innermost type-b system in full; each subsequent level embeds the
//! previous compressed inverse in the inner two-panels-per-edge block of
//! its type-b system, inverts, and compresses through the weighted
//! prolongation. The cost grows linearly with the recursion depth, and
//! compressed inverses are cached by the local geometry signature so
//! congruent corners share one build.
//!
//! All local grids are vertex-centered (see
//! [`crate::geometry::local_gamma_star_mesh_rel`]), which keeps the
//! kernel distances exact at any depth.

use crate::geometry::{local_gamma_star_mesh_rel, LocalVariant, PanelMesh, NODES_PER_PANEL};
use crate::kernels::OpKind;
use crate::linalg::{CMat, LuFactors};
use crate::quadrature::assemble_dense_full;
use crate::specfun::{gauss_legendre_16, interp_matrix};
use crate::{Error, Result, C64};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

const NPP: usize = NODES_PER_PANEL;

/// Prolongation from a type-a grid (32 nodes per edge-end) to a type-b
/// grid (48 nodes per edge-end), block-diagonal per edge-end, and its
/// weighted counterpart W_b P W_a^-1.
///
/// W holds the parameter-measure quadrature weights. That makes
/// P_W^T P = I exact for every geometry (the composite rule integrates
/// the degree-30 Lagrange products without a weight function in the way);
/// with arclength weights the identity would degrade with the square of
/// the panel size on curved edges. The compression transfers arclength
/// functionals all the same, because the speed factor folds into the
/// smooth test function.
#[derive(Debug, Clone)]
pub struct Prolongation {
    pub p: CMat,
    pub p_w: CMat,
}

// parameter-measure node weight (GL weight times panel half-width)
fn param_weight(mesh: &PanelMesh, node: usize) -> f64 {
    let panel = &mesh.panels[node / NPP];
    let rule = gauss_legendre_16();
    rule.weights[node % NPP] * 0.5 * (panel.d1 - panel.d0).abs()
}

/// Build the prolongation for one level from its local meshes. The outer
/// panels coincide (identity block); the inner type-a panel maps onto the
/// two quarter panels by degree-15 interpolation.
pub fn prolongation(mesh_a: &PanelMesh, mesh_b: &PanelMesh) -> Prolongation {
    let ends = mesh_a.panels.len() / 2;
    assert_eq!(mesh_b.panels.len(), 3 * ends);
    let na = 2 * NPP * ends;
    let nb = 3 * NPP * ends;
    let rule = gauss_legendre_16();
    let mut p = CMat::zeros(nb, na);
    for e in 0..ends {
        let (bo, ba) = (3 * NPP * e, 2 * NPP * e);
        // outer panels share their nodes
        for j in 0..NPP {
            p[(bo + j, ba + j)] = C64::new(1.0, 0.0);
        }
        // inner a panel -> b mid + inner panels
        let a_inner = &mesh_a.panels[2 * e + 1];
        let (a0, a1) = (a_inner.d0, a_inner.d1);
        let mut lambdas = Vec::with_capacity(2 * NPP);
        for bp in [3 * e + 1, 3 * e + 2] {
            let panel = &mesh_b.panels[bp];
            let half = 0.5 * (panel.d1 - panel.d0);
            for x in &rule.nodes {
                let d = panel.d0 + (x + 1.0) * half;
                lambdas.push(2.0 * (d - a0) / (a1 - a0) - 1.0);
            }
        }
        let interp = interp_matrix(&rule.nodes, &lambdas).expect("distinct nodes");
        for row in 0..2 * NPP {
            for col in 0..NPP {
                p[(bo + NPP + row, ba + NPP + col)] = C64::new(interp.row(row)[col], 0.0);
            }
        }
    }
    let mut p_w = p.clone();
    for i in 0..nb {
        for j in 0..na {
            let v = p_w[(i, j)];
            if v != C64::new(0.0, 0.0) {
                p_w[(i, j)] = v * (param_weight(mesh_b, i) / param_weight(mesh_a, j));
            }
        }
    }
    Prolongation { p, p_w }
}

// Two-component version acting on (rho1, rho2) stacked density-major.
fn stack2(m: &CMat) -> CMat {
    let (r, c) = (m.nrows, m.ncols);
    let mut out = CMat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            if v != C64::new(0.0, 0.0) {
                out[(i, j)] = v;
                out[(r + i, c + j)] = v;
            }
        }
    }
    out
}

// The local 2x2 block system [[0, A], [B, I]] on a grid of n nodes.
fn block_system(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows;
    let mut m = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, n + j)] = a[(i, j)];
            m[(n + i, j)] = b[(i, j)];
        }
        m[(n + i, n + i)] = C64::new(1.0, 0.0);
    }
    m
}

/// Geometry-dependent payload of a compressed inverse; shared between
/// congruent vertices through the cache.
#[derive(Debug)]
pub struct RBlocks {
    pub q: usize,
    pub r1: CMat,
    pub r2: CMat,
    pub r3: CMat,
    pub r4: CMat,
    pub r1_lu: LuFactors,
    /// Max-norm of the R4 block. The compressed inverse of a system with a
    /// vanishing (1,1) block has an exactly zero (2,2) block on Gamma*, so
    /// this measures the structural identity and is reported as a
    /// diagnostic.
    pub r4_deviation: f64,
    levels: Vec<LevelData>,
}

#[derive(Debug)]
struct LevelData {
    lu: LuFactors,
    mesh_b: PanelMesh,
    p2: CMat,
    /// Kernel couplings from outer-panel sources to inner targets,
    /// needed by the backward recursion.
    a_io: CMat,
    b_io: CMat,
}

/// The compressed inverse of one singular point, with the coarse-grid
/// index bookkeeping.
#[derive(Debug, Clone)]
pub struct CompressedInverse {
    pub vertex: usize,
    pub n_sub: usize,
    /// Global coarse node ids of Gamma*, in the local ordering the blocks
    /// use.
    pub star_nodes: Vec<usize>,
    pub blocks: Arc<RBlocks>,
}

impl CompressedInverse {
    pub fn q(&self) -> usize {
        self.blocks.q
    }
}

/// Partition a 2q x 2q compressed inverse into its four equi-sized blocks
/// (index set 1 is the rho1 component).
pub fn block_partition(r: &CMat) -> (CMat, CMat, CMat, CMat) {
    let q = r.nrows / 2;
    let mut r1 = CMat::zeros(q, q);
    let mut r2 = CMat::zeros(q, q);
    let mut r3 = CMat::zeros(q, q);
    let mut r4 = CMat::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            r1[(i, j)] = r[(i, j)];
            r3[(i, j)] = r[(i, j + q)];
            r2[(i, j)] = r[(i + q, j)];
            r4[(i, j)] = r[(i + q, j + q)];
        }
    }
    (r1, r2, r3, r4)
}

fn build_count() -> &'static AtomicUsize {
    static COUNT: AtomicUsize = AtomicUsize::new(0);
    &COUNT
}

/// Number of from-scratch compressed-inverse builds so far (cache misses).
pub fn r_build_count() -> usize {
    build_count().load(Ordering::Relaxed)
}

struct CacheEntry {
    signature: Vec<f64>,
    k_bits: u64,
    n_sub: usize,
    ops: (OpKind, OpKind),
    blocks: Arc<RBlocks>,
}

fn cache() -> &'static Mutex<Vec<CacheEntry>> {
    static CACHE: OnceLock<Mutex<Vec<CacheEntry>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(Vec::new()))
}

/// Drop all cached compressed inverses.
pub fn clear_r_cache() {
    cache().lock().unwrap().clear();
}

// Signature of the local geometry: panel endpoints (and one curvature
// probe per panel) of the coarse Gamma* panels relative to the vertex,
// normalized by the local scale. Two vertices whose signatures agree to
// 1e-12 share one compressed inverse.
fn geometry_signature(mesh: &PanelMesh, vertex: usize) -> Vec<f64> {
    let loc = mesh.geom.vertices[vertex].location;
    let origin = C64::new(loc[0], loc[1]);
    let mut pts = Vec::new();
    for se in &mesh.star[vertex] {
        for &p in &se.panels {
            let panel = &mesh.panels[p];
            pts.push(panel.z0 + mesh.origin - origin);
            pts.push(panel.z1 + mesh.origin - origin);
            let edge = &mesh.geom.edges[panel.edge];
            let dm = 0.75 * panel.d0 + 0.25 * panel.d1;
            pts.push(
                edge.position_rel_c(panel.anchor, C64::new(dm, 0.0)) + panel.corr + mesh.origin
                    - origin,
            );
        }
    }
    let scale = pts.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut sig = Vec::with_capacity(2 * pts.len());
    for z in pts {
        sig.push(z.re / scale);
        sig.push(z.im / scale);
    }
    sig
}

fn signatures_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

/// Build the compressed inverse R for one vertex by the forward recursion.
/// `ops` is the (A, B) operator pair of the block system. Per-level
/// factorizations are retained for the backward recursion.
pub fn build_r(
    mesh: &PanelMesh,
    vertex: usize,
    k: f64,
    ops: (OpKind, OpKind),
    n_sub: usize,
) -> Result<CompressedInverse> {
    let star_nodes = mesh.star_nodes(vertex);
    if star_nodes.is_empty() {
        return Err(Error::Geometry(format!("vertex {vertex} has no star panels")));
    }
    let signature = geometry_signature(mesh, vertex);
    {
        let guard = cache().lock().unwrap();
        for entry in guard.iter() {
            if entry.k_bits == k.to_bits()
                && entry.n_sub == n_sub
                && entry.ops == ops
                && signatures_match(&entry.signature, &signature)
            {
                return Ok(CompressedInverse {
                    vertex,
                    n_sub,
                    star_nodes,
                    blocks: entry.blocks.clone(),
                });
            }
        }
    }
    let blocks = Arc::new(build_r_blocks(mesh, vertex, k, ops, n_sub)?);
    build_count().fetch_add(1, Ordering::Relaxed);
    cache().lock().unwrap().push(CacheEntry {
        signature,
        k_bits: k.to_bits(),
        n_sub,
        ops,
        blocks: blocks.clone(),
    });
    Ok(CompressedInverse { vertex, n_sub, star_nodes, blocks })
}

fn local_system(mesh_b: &PanelMesh, k: f64, ops: (OpKind, OpKind)) -> Result<(CMat, CMat, CMat)> {
    let a = assemble_dense_full(ops.0, mesh_b, k)?;
    let b = assemble_dense_full(ops.1, mesh_b, k)?;
    let m = block_system(&a, &b);
    Ok((m, a, b))
}

// spatial index lists of a type-b grid: per end, the outer panel's 16
// nodes and the inner two panels' 32 nodes
fn type_b_index_lists(ends: usize) -> (Vec<usize>, Vec<usize>) {
    let mut outer = Vec::with_capacity(NPP * ends);
    let mut inner = Vec::with_capacity(2 * NPP * ends);
    for e in 0..ends {
        outer.extend(3 * NPP * e..3 * NPP * e + NPP);
        inner.extend(3 * NPP * e + NPP..3 * NPP * (e + 1));
    }
    (outer, inner)
}

fn extract_block(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    let mut out = CMat::zeros(rows.len(), cols.len());
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            out[(i, j)] = m[(r, c)];
        }
    }
    out
}

fn build_r_blocks(
    mesh: &PanelMesh,
    vertex: usize,
    k: f64,
    ops: (OpKind, OpKind),
    n_sub: usize,
) -> Result<RBlocks> {
    let ends = mesh.star[vertex].len();
    let q = 2 * NPP * ends;

    if n_sub == 0 {
        // zero refinement: R is the direct inverse of the coarse star
        // system; the compression is the identity
        let mesh_a = local_gamma_star_mesh_rel(mesh, vertex, 0, 0, LocalVariant::TypeA);
        let (m, _, _) = local_system(&mesh_a, k, ops)?;
        let lu = LuFactors::new(&m)
            .map_err(|_| Error::SingularLocalSystem { vertex, level: 0 })?;
        let r = lu.inverse();
        let levels = vec![LevelData {
            lu,
            mesh_b: mesh_a,
            p2: CMat::identity(2 * q),
            a_io: CMat::zeros(0, 0),
            b_io: CMat::zeros(0, 0),
        }];
        return finish_blocks(r, vertex, levels);
    }

    let (outer_ix, inner_ix) = type_b_index_lists(ends);
    let mut levels: Vec<LevelData> = Vec::with_capacity(n_sub);
    let mut r_prev: Option<CMat> = None;
    for level in 1..=n_sub {
        let mesh_b = local_gamma_star_mesh_rel(mesh, vertex, level, n_sub, LocalVariant::TypeB);
        let mesh_a = local_gamma_star_mesh_rel(mesh, vertex, level, n_sub, LocalVariant::TypeA);
        let prol = prolongation(&mesh_a, &mesh_b);
        let p2 = stack2(&prol.p);
        let pw2 = stack2(&prol.p_w);
        let (mut m, a_full, b_full) = local_system(&mesh_b, k, ops)?;
        let a_io = extract_block(&a_full, &inner_ix, &outer_ix);
        let b_io = extract_block(&b_full, &inner_ix, &outer_ix);
        if let Some(prev) = &r_prev {
            // replace the inner-inner block (the type-a grid of the
            // previous level) with the previous compressed inverse
            let lu = LuFactors::new(prev)
                .map_err(|_| Error::SingularLocalSystem { vertex, level })?;
            let r_prev_inv = lu.inverse();
            let sb = 3 * NPP * ends;
            for (bi, &si) in inner_ix.iter().enumerate() {
                for (bj, &sj) in inner_ix.iter().enumerate() {
                    for dr in 0..2 {
                        for dc in 0..2 {
                            m[(dr * sb + si, dc * sb + sj)] =
                                r_prev_inv[(dr * q + bi, dc * q + bj)];
                        }
                    }
                }
            }
        }
        let lu =
            LuFactors::new(&m).map_err(|_| Error::SingularLocalSystem { vertex, level })?;
        let x = lu.solve_mat(&p2);
        let r_i = pw2.transpose().matmul(&x);
        r_prev = Some(r_i);
        levels.push(LevelData { lu, mesh_b, p2, a_io, b_io });
    }
    finish_blocks(r_prev.unwrap(), vertex, levels)
}

fn finish_blocks(r: CMat, vertex: usize, levels: Vec<LevelData>) -> Result<RBlocks> {
    let q = r.nrows / 2;
    let (r1, r2, r3, r4) = block_partition(&r);
    let r1_lu = LuFactors::new(&r1)
        .map_err(|_| Error::SingularLocalSystem { vertex, level: usize::MAX })?;
    let r4_deviation = r4.max_abs();
    Ok(RBlocks { q, r1, r2, r3, r4, r1_lu, r4_deviation, levels })
}

/// Density values reconstructed on the fine grid near a vertex.
#[derive(Debug, Clone)]
pub struct FineDensity {
    /// Vertex-centered mesh covering Gamma* with the dyadic fine panels.
    pub mesh: PanelMesh,
    pub rho1: Vec<C64>,
    pub rho2: Vec<C64>,
}

/// Backward recursion: reconstruct both density components on the fine
/// grid from the transformed coarse density restricted to Gamma* (in the
/// local node ordering, density-major).
pub fn reconstruct_fine_density(
    ci: &CompressedInverse,
    rho_tilde_star: &[C64],
) -> Result<FineDensity> {
    let blocks = &ci.blocks;
    let q = blocks.q;
    assert_eq!(rho_tilde_star.len(), 2 * q);
    let ends = q / (2 * NPP);

    let mut rho1: Vec<C64> = Vec::new();
    let mut rho2: Vec<C64> = Vec::new();
    let mut mesh_parts: Vec<PanelMesh> = Vec::new();

    let mut rho_a: Vec<C64> = rho_tilde_star.to_vec();
    for (li, level) in blocks.levels.iter().enumerate().rev() {
        let prhs = level.p2.matvec(&rho_a);
        let v_b = level.lu.solve(&prhs);
        let sb = level.mesh_b.num_nodes();
        if li == 0 {
            // innermost level: every value is a final density sample
            rho1.extend_from_slice(&v_b[..sb]);
            rho2.extend_from_slice(&v_b[sb..]);
            mesh_parts.push(level.mesh_b.clone());
        } else {
            // outer panel values are final; the next level's transformed
            // density is the effective right-hand side on the inner grid:
            // (P rho~)_inner minus the outer couplings
            let (outer_ix, inner_ix) = type_b_index_lists(ends);
            let v_o1: Vec<C64> = outer_ix.iter().map(|&s| v_b[s]).collect();
            let v_o2: Vec<C64> = outer_ix.iter().map(|&s| v_b[sb + s]).collect();
            let coup1 = level.a_io.matvec(&v_o2);
            let coup2 = level.b_io.matvec(&v_o1);
            let mut next = vec![C64::new(0.0, 0.0); 2 * q];
            for (ii, &s) in inner_ix.iter().enumerate() {
                next[ii] = prhs[s] - coup1[ii];
                next[q + ii] = prhs[sb + s] - coup2[ii];
            }
            for e in 0..ends {
                let bo = 3 * NPP * e;
                for j in 0..NPP {
                    rho1.push(v_b[bo + j]);
                    rho2.push(v_b[sb + bo + j]);
                }
            }
            let outer_panels: Vec<usize> = (0..ends).map(|e| 3 * e).collect();
            let mut part = level.mesh_b.clone();
            retain_panels(&mut part, &outer_panels);
            mesh_parts.push(part);
            rho_a = next;
        }
    }

    let mesh = concat_meshes(&mesh_parts);
    Ok(FineDensity { mesh, rho1, rho2 })
}

fn retain_panels(mesh: &mut PanelMesh, keep: &[usize]) {
    let mut panels = Vec::with_capacity(keep.len());
    let mut z = Vec::new();
    let mut normal = Vec::new();
    let mut dz = Vec::new();
    let mut speed = Vec::new();
    let mut weight = Vec::new();
    let mut param = Vec::new();
    for &p in keep {
        let mut panel = mesh.panels[p].clone();
        let old = panel.nodes();
        panel.first_node = z.len();
        z.extend_from_slice(&mesh.z[old.clone()]);
        normal.extend_from_slice(&mesh.normal[old.clone()]);
        dz.extend_from_slice(&mesh.dz[old.clone()]);
        speed.extend_from_slice(&mesh.speed[old.clone()]);
        weight.extend_from_slice(&mesh.weight[old.clone()]);
        param.extend_from_slice(&mesh.param[old]);
        panels.push(panel);
    }
    mesh.panels = panels;
    mesh.z = z;
    mesh.normal = normal;
    mesh.dz = dz;
    mesh.speed = speed;
    mesh.weight = weight;
    mesh.param = param;
    for star in mesh.star.iter_mut() {
        star.clear();
    }
}

fn concat_meshes(parts: &[PanelMesh]) -> PanelMesh {
    let mut out = parts[0].clone();
    for part in &parts[1..] {
        assert_eq!(part.origin, out.origin);
        let offset = out.z.len();
        for panel in &part.panels {
            let mut p = panel.clone();
            p.first_node += offset;
            out.panels.push(p);
        }
        out.z.extend_from_slice(&part.z);
        out.normal.extend_from_slice(&part.normal);
        out.dz.extend_from_slice(&part.dz);
        out.speed.extend_from_slice(&part.speed);
        out.weight.extend_from_slice(&part.weight);
        out.param.extend_from_slice(&part.param);
    }
    for star in out.star.iter_mut() {
        star.clear();
    }
    out
}
