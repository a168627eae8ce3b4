//! The reduced one-density linear system, its matrix-free application,
//! the GMRES driver, and recovery of all density variants.
//!
//! With A and B the preconditioning pair (S and T for Dirichlet, T and S
//! for Neumann), the compressed block system collapses to a single
//! unknown rho~ through the change of variables that satisfies the second
//! block row identically. The reduced application is
//!
//! ```text
//! y = I* x + s + A_circ (R2 x - R4 v + R2 s),
//!     w = R1 x,  v = B_circ w,  s = R1^{-1} R3 v   (s = 0 off Gamma*)
//! ```
//!
//! where every R block acts on its vertex's Gamma* nodes and as the
//! identity (R1, R4) or zero (R2, R3) elsewhere. The weight-corrected
//! densities fall out of the same quantities.

mod gmres;

pub use gmres::{gmres, GmresConfig, GmresResult, GmresStop};

use crate::geometry::PanelMesh;
use crate::kernels::OpKind;
use crate::quadrature::{assemble, OperatorSet};
use crate::rcip::{build_r, CompressedInverse};
use crate::{Error, Result, C64};
use std::time::Instant;

/// Which boundary condition the problem imposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Boundary data: an incident plane wave with the total-field-zero
/// convention, or explicit data.
#[derive(Debug, Clone)]
pub enum BoundaryData {
    /// u_in = exp(i k (x cos theta + y sin theta)); the right-hand side is
    /// -u_in (Dirichlet) or -du_in/dnu (Neumann).
    PlaneWave { theta: f64 },
    /// g as a polynomial in the x coordinate: sum_j coeffs[j] x^j.
    XPolynomial { coeffs: Vec<f64> },
    /// Homogeneous data.
    Zero,
}

/// A scattering problem: condition, wavenumber, data.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub bc: BoundaryCondition,
    pub k: f64,
    pub data: BoundaryData,
}

/// The preconditioning pair (A, B) of the block system.
pub fn select_operators(bc: BoundaryCondition) -> (OpKind, OpKind) {
    match bc {
        BoundaryCondition::Dirichlet => (OpKind::S, OpKind::T),
        BoundaryCondition::Neumann => (OpKind::T, OpKind::S),
    }
}

/// The incident plane wave at a point.
pub fn incident_plane_wave(k: f64, theta: f64, z: C64) -> C64 {
    (C64::i() * k * (z.re * theta.cos() + z.im * theta.sin())).exp()
}

/// Gradient of the incident plane wave dotted with a unit normal.
pub fn incident_plane_wave_dn(k: f64, theta: f64, z: C64, normal: C64) -> C64 {
    let dir = C64::new(theta.cos(), theta.sin());
    let n_dot_dir = normal.re * dir.re + normal.im * dir.im;
    C64::i() * k * n_dot_dir * incident_plane_wave(k, theta, z)
}

/// Sample the right-hand side g at the coarse nodes.
pub fn rhs_vector(problem: &ProblemSpec, mesh: &PanelMesh) -> Vec<C64> {
    (0..mesh.num_nodes())
        .map(|i| {
            let z = mesh.z[i] + mesh.origin;
            match (&problem.data, problem.bc) {
                (BoundaryData::PlaneWave { theta }, BoundaryCondition::Dirichlet) => {
                    -incident_plane_wave(problem.k, *theta, z)
                }
                (BoundaryData::PlaneWave { theta }, BoundaryCondition::Neumann) => {
                    -incident_plane_wave_dn(problem.k, *theta, z, mesh.normal[i])
                }
                (BoundaryData::XPolynomial { coeffs }, _) => {
                    let mut v = 0.0;
                    for c in coeffs.iter().rev() {
                        v = v * z.re + c;
                    }
                    C64::new(v, 0.0)
                }
                (BoundaryData::Zero, _) => C64::new(0.0, 0.0),
            }
        })
        .collect()
}

/// Assembled operators and compressed inverses for one mesh and problem.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub a: OperatorSet,
    pub b: OperatorSet,
    pub rs: Vec<CompressedInverse>,
    pub n: usize,
}

impl SystemOperators {
    /// R1 x: identity off Gamma*.
    pub fn apply_r1(&self, x: &[C64]) -> Vec<C64> {
        let mut out = x.to_vec();
        for ci in &self.rs {
            for (li, &gi) in ci.star_nodes.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (lj, &gj) in ci.star_nodes.iter().enumerate() {
                    acc += ci.blocks.r1[(li, lj)] * x[gj];
                }
                out[gi] = acc;
            }
        }
        out
    }

    // s = R1^{-1} R3 v on Gamma*, zero elsewhere.
    fn apply_r1inv_r3(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for ci in &self.rs {
            let q = ci.q();
            let mut local = vec![C64::new(0.0, 0.0); q];
            for li in 0..q {
                for (lj, &gj) in ci.star_nodes.iter().enumerate() {
                    local[li] += ci.blocks.r3[(li, lj)] * v[gj];
                }
            }
            let solved = ci.blocks.r1_lu.solve(&local);
            for (li, &gi) in ci.star_nodes.iter().enumerate() {
                out[gi] = solved[li];
            }
        }
        out
    }

    /// The weight-corrected second density for a given rho~:
    /// R2 x - (R4 - R2 R1^{-1} R3) B_circ R1 x, with v and s precomputed.
    fn rho2_hat(&self, x: &[C64], v: &[C64], s: &[C64]) -> Vec<C64> {
        // off Gamma*: -v; on Gamma*: r2 (x + s) - r4 v
        let mut out: Vec<C64> = v.iter().map(|vi| -vi).collect();
        for ci in &self.rs {
            for (li, &gi) in ci.star_nodes.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (lj, &gj) in ci.star_nodes.iter().enumerate() {
                    acc += ci.blocks.r2[(li, lj)] * (x[gj] + s[gj])
                        - ci.blocks.r4[(li, lj)] * v[gj];
                }
                out[gi] = acc;
            }
        }
        out
    }

    fn star_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n];
        for ci in &self.rs {
            for &g in &ci.star_nodes {
                flags[g] = true;
            }
        }
        flags
    }

    /// Apply the reduced system matrix of the compressed formulation.
    pub fn reduced_matvec(&self, x: &[C64]) -> Vec<C64> {
        let w = self.apply_r1(x);
        let v = self.b.apply_circ(&w);
        let s = self.apply_r1inv_r3(&v);
        let q = self.rho2_hat(x, &v, &s);
        let aq = self.a.apply_circ(&q);
        let star = self.star_flags();
        let mut y = aq;
        for i in 0..self.n {
            y[i] += s[i];
            if star[i] {
                y[i] += x[i];
            }
        }
        y
    }

    /// Apply the expanded two-density system of the compressed
    /// formulation (used as an oracle for the reduced form).
    pub fn expanded_matvec(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        assert_eq!(x.len(), 2 * n);
        let (x1, x2) = x.split_at(n);
        // u = R (x1, x2) with R identity off Gamma*
        let mut u1 = x1.to_vec();
        let mut u2 = x2.to_vec();
        for ci in &self.rs {
            for (li, &gi) in ci.star_nodes.iter().enumerate() {
                let mut a1 = C64::new(0.0, 0.0);
                let mut a2 = C64::new(0.0, 0.0);
                for (lj, &gj) in ci.star_nodes.iter().enumerate() {
                    a1 += ci.blocks.r1[(li, lj)] * x1[gj] + ci.blocks.r3[(li, lj)] * x2[gj];
                    a2 += ci.blocks.r2[(li, lj)] * x1[gj] + ci.blocks.r4[(li, lj)] * x2[gj];
                }
                u1[gi] = a1;
                u2[gi] = a2;
            }
        }
        let star = self.star_flags();
        let au2 = self.a.apply_circ(&u2);
        let bu1 = self.b.apply_circ(&u1);
        let mut y = vec![C64::new(0.0, 0.0); 2 * n];
        for i in 0..n {
            // y1 = x1 - I_circ u1 + A_circ u2
            y[i] = x1[i] + au2[i] - if star[i] { C64::new(0.0, 0.0) } else { u1[i] };
            // y2 = x2 + B_circ u1
            y[n + i] = x2[i] + bu1[i];
        }
        y
    }
}

/// Wall-clock decomposition of a solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub t_build: f64,
    pub t_solve: f64,
    pub t_total: f64,
}

/// The transformed density plus everything recovered from it.
#[derive(Debug, Clone)]
pub struct Solution {
    pub problem: ProblemSpec,
    pub rho_tilde: Vec<C64>,
    pub rho1_tilde: Vec<C64>,
    pub rho2_tilde: Vec<C64>,
    pub rho1_hat: Vec<C64>,
    pub rho2_hat: Vec<C64>,
    pub gmres: GmresResult,
    pub timings: Timings,
    pub n_sub: usize,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.gmres.converged()
    }
}

/// Assemble the operator pair and all compressed inverses. Distinct
/// vertices build in parallel.
pub fn build_system(
    problem: &ProblemSpec,
    mesh: &PanelMesh,
    n_sub: usize,
) -> Result<SystemOperators> {
    let (op_a, op_b) = select_operators(problem.bc);
    let a = assemble(op_a, mesh, problem.k)?;
    let b = assemble(op_b, mesh, problem.k)?;
    let nv = mesh.geom.vertices.len();
    let rs: Vec<CompressedInverse> = {
        use rayon::prelude::*;
        (0..nv)
            .into_par_iter()
            .map(|v| build_r(mesh, v, problem.k, (op_a, op_b), n_sub))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SystemOperators { a, b, rs, n: mesh.num_nodes() })
}

/// Solver configuration; `tol` is the relative Arnoldi residual target.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub n_sub: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { n_sub: 40, tol: 1e-12, max_iter: 400 }
    }
}

/// Full pipeline: assemble, solve the reduced system with GMRES, recover
/// the density variants. A non-converged GMRES is reported in the
/// returned solution, not an error.
pub fn solve(problem: &ProblemSpec, mesh: &PanelMesh, config: &SolveConfig) -> Result<Solution> {
    let t0 = Instant::now();
    let sys = build_system(problem, mesh, config.n_sub)?;
    let t_build = t0.elapsed().as_secs_f64();
    let sol = solve_with_system(problem, mesh, &sys, config, t_build)?;
    Ok(sol)
}

/// Solve with prebuilt operators (lets sweeps reuse the assembly).
pub fn solve_with_system(
    problem: &ProblemSpec,
    mesh: &PanelMesh,
    sys: &SystemOperators,
    config: &SolveConfig,
    t_build: f64,
) -> Result<Solution> {
    if sys.n != mesh.num_nodes() {
        return Err(Error::Solver("system/mesh size mismatch".into()));
    }
    let g = rhs_vector(problem, mesh);
    let t1 = Instant::now();
    let gconf = GmresConfig {
        tol: config.tol,
        max_iter: config.max_iter,
        ..Default::default()
    };
    let result = gmres(|x| sys.reduced_matvec(x), &g, &gconf);
    let t_solve = t1.elapsed().as_secs_f64();

    let x = result.x.clone();
    let w = sys.apply_r1(&x);
    let v = sys.b.apply_circ(&w);
    let s = sys.apply_r1inv_r3(&v);
    let rho1_tilde: Vec<C64> = x.iter().zip(&s).map(|(a, b)| a + b).collect();
    let rho2_tilde: Vec<C64> = v.iter().map(|vi| -vi).collect();
    let rho2_hat = sys.rho2_hat(&x, &v, &s);

    Ok(Solution {
        problem: problem.clone(),
        rho_tilde: x,
        rho1_tilde,
        rho2_tilde,
        rho1_hat: w,
        rho2_hat,
        gmres: result,
        timings: Timings {
            t_build,
            t_solve,
            t_total: t_build + t_solve,
        },
        n_sub: config.n_sub,
    })
}
