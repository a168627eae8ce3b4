//! Boundary integral equation solvers for the 2D Helmholtz equation on
//! piecewise smooth open curves.
//!
//! The library solves Dirichlet and Neumann scattering problems on curves
//! with endpoints, corners, and multi-junctions. The single-layer operator
//! and the hypersingular operator precondition each other; the point
//! singularities of the density are absorbed by recursively compressed
//! inverse preconditioning (RCIP), so the global solve lives entirely on a
//! coarse composite Gauss-Legendre mesh. Layer operators are discretized
//! with kernel-split Nystrom quadrature (smooth, logarithmic, Cauchy, and
//! hypersingular channels with analytic product-integration weights), the
//! reduced one-density system is solved with full GMRES, and scattered
//! fields are evaluated anywhere off the curve with near-field corrected
//! quadrature.
//!
//! Module map:
//! - [`specfun`]: Bessel/Hankel functions with log-splits, Gauss-Legendre
//!   rules, polynomial interpolation.
//! - [`geometry`]: edge curves, singular-point registry, panel meshes.
//! - [`kernels`]: Helmholtz layer kernels and their explicit splits.
//! - [`quadrature`]: Nystrom assembly and product-integration weights.
//! - [`rcip`]: the compressed inverse R per singular point.
//! - [`solver`]: the reduced system, GMRES, and density recovery.
//! - [`field`]: off-surface evaluation, grids, and error estimation.

pub mod field;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod rcip;
pub mod solver;
pub mod specfun;

pub use field::{error_grid, ErrorGrid, FieldEvaluator, FieldGrid, GridSpec};
pub use geometry::{EdgeCurve, GeometrySpec, PanelMesh, Resolution, SingularPoint, VertexKind};
pub use kernels::{KernelPoint, KernelSplit, OpKind};
pub use quadrature::{CorrectionStencil, OperatorSet};
pub use rcip::{block_partition, build_r, reconstruct_fine_density, CompressedInverse, Prolongation};
pub use solver::{
    solve, BoundaryCondition, BoundaryData, ProblemSpec, Solution, SolveConfig, SystemOperators,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("singular local system at vertex {vertex} level {level}")]
    SingularLocalSystem { vertex: usize, level: usize },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("field error: {0}")]
    Field(String),
}

pub type Result<T> = std::result::Result<T, Error>;
