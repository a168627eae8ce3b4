//! Problem files: a versioned TOML schema describing geometry, boundary
//! condition, mesh resolution, solver settings, and output grids. Unknown
//! keys are rejected.

use anyhow::{bail, Context};
use helmarc::geometry::{arc_length, GeometrySpec, Resolution};
use helmarc::solver::{BoundaryCondition, BoundaryData, ProblemSpec};
use helmarc::GridSpec;
use serde::Deserialize;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub geometry: GeometrySection,
    pub problem: ProblemSection,
    pub mesh: MeshSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub reference: Option<ReferenceSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GeometrySection {
    pub preset: String,
    pub copies: Option<usize>,
    pub levels: Option<usize>,
    pub center: Option<[f64; 2]>,
    pub radius: Option<f64>,
    pub points: Option<Vec<[f64; 2]>>,
    pub edges: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ProblemSection {
    pub bc: String,
    pub wavenumber: Option<f64>,
    /// L/lambda; the wavenumber is derived from the total arc length.
    pub wavelengths: Option<f64>,
    /// Incident plane-wave angle (total-field-zero convention).
    pub theta: Option<f64>,
    /// Explicit Dirichlet/Neumann data as a polynomial in x.
    pub g_poly_x: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MeshSection {
    pub panels_per_wavelength: Option<f64>,
    pub panels: Option<usize>,
    pub panels_per_edge: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SolverSection {
    #[serde(default = "default_nsub")]
    pub nsub: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_nsub() -> usize {
    40
}
fn default_tol() -> f64 {
    1e-12
}
fn default_max_iter() -> usize {
    400
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { nsub: default_nsub(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridSection {
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub total_field: bool,
    /// Also solve an overresolved reference and write an error grid.
    #[serde(default)]
    pub error_grid: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReferenceSection {
    pub target: [f64; 2],
    pub value: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Fully resolved problem: everything the pipeline needs.
pub struct ResolvedProblem {
    pub geometry: std::sync::Arc<helmarc::geometry::Geometry>,
    pub problem: ProblemSpec,
    pub resolution: Resolution,
    pub nsub: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub grid: Option<GridSection>,
    pub reference: Option<ReferenceSection>,
    pub out_dir: std::path::PathBuf,
    pub total_length: f64,
}

pub fn load(path: &Path) -> anyhow::Result<ProblemFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading problem file {}", path.display()))?;
    let file: ProblemFile = toml::from_str(&text).context("parsing problem file")?;
    if file.version != SCHEMA_VERSION {
        bail!("unsupported problem-file version {} (expected {SCHEMA_VERSION})", file.version);
    }
    Ok(file)
}

pub fn geometry_spec(section: &GeometrySection) -> anyhow::Result<GeometrySpec> {
    Ok(match section.preset.as_str() {
        "segment" => GeometrySpec::Segment,
        "spiral" => GeometrySpec::Spiral,
        "one-corner" => GeometrySpec::OneCorner,
        "corner-tiling" => {
            GeometrySpec::CornerTiling { copies: section.copies.unwrap_or(4) }
        }
        "y-shape" => GeometrySpec::YShape,
        "tree" => GeometrySpec::Tree { levels: section.levels.unwrap_or(3) },
        "circle" => GeometrySpec::Circle {
            center: section.center.unwrap_or([0.0, 0.0]),
            radius: section.radius.unwrap_or(1.0),
        },
        "polyline" => {
            let points = section
                .points
                .clone()
                .ok_or_else(|| anyhow::anyhow!("polyline needs points"))?;
            let edges = section
                .edges
                .clone()
                .ok_or_else(|| anyhow::anyhow!("polyline needs edges"))?
                .into_iter()
                .map(|[a, b]| (a, b))
                .collect();
            GeometrySpec::Polyline { points, edges }
        }
        other => bail!("unknown geometry preset '{other}'"),
    })
}

pub fn resolve(file: &ProblemFile, out_override: Option<&Path>) -> anyhow::Result<ResolvedProblem> {
    let spec = geometry_spec(&file.geometry)?;
    let geometry = helmarc::geometry::build_geometry(&spec)?;
    let total_length: f64 = geometry.edges.iter().map(arc_length).sum();

    let k = match (file.problem.wavenumber, file.problem.wavelengths) {
        (Some(k), None) => k,
        (None, Some(ll)) => std::f64::consts::TAU * ll / total_length,
        _ => bail!("specify exactly one of problem.wavenumber, problem.wavelengths"),
    };
    let bc = match file.problem.bc.as_str() {
        "dirichlet" => BoundaryCondition::Dirichlet,
        "neumann" => BoundaryCondition::Neumann,
        other => bail!("unknown boundary condition '{other}'"),
    };
    let data = match (&file.problem.theta, &file.problem.g_poly_x) {
        (Some(theta), None) => BoundaryData::PlaneWave { theta: *theta },
        (None, Some(coeffs)) => BoundaryData::XPolynomial { coeffs: coeffs.clone() },
        (None, None) => bail!("specify problem.theta or problem.g-poly-x"),
        _ => bail!("specify only one of problem.theta, problem.g-poly-x"),
    };

    let resolution = match (
        file.mesh.panels_per_wavelength,
        file.mesh.panels,
        &file.mesh.panels_per_edge,
    ) {
        (Some(ppw), None, None) => Resolution::PointsPerWavelength(ppw),
        (None, Some(n), None) => Resolution::UniformPanels(n),
        (None, None, Some(v)) => Resolution::PerEdgePanels(v.clone()),
        _ => bail!("specify exactly one mesh resolution field"),
    };

    let out_dir = out_override
        .map(|p| p.to_path_buf())
        .or_else(|| file.output.dir.as_ref().map(Into::into))
        .unwrap_or_else(|| "out".into());

    Ok(ResolvedProblem {
        geometry,
        problem: ProblemSpec { bc, k, data },
        resolution,
        nsub: file.solver.nsub,
        tol: file.solver.tol,
        max_iter: file.solver.max_iter,
        grid: file.grid.as_ref().map(|g| GridSection {
            bbox: g.bbox,
            nx: g.nx,
            ny: g.ny,
            total_field: g.total_field,
            error_grid: g.error_grid,
        }),
        reference: file.reference.as_ref().map(|r| ReferenceSection {
            target: r.target,
            value: r.value,
        }),
        out_dir,
        total_length,
    })
}

pub fn grid_spec(section: &GridSection) -> GridSpec {
    GridSpec { bbox: section.bbox, nx: section.nx, ny: section.ny }
}
