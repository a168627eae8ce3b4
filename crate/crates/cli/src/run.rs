//! Command implementations: solve, parameter sweeps, grid conversion.

use crate::gridio;
use crate::problem::{grid_spec, ResolvedProblem};
use anyhow::Context;
use helmarc::field::{error_grid, FieldEvaluator};
use helmarc::geometry::build_coarse_mesh;
use helmarc::solver::{build_system, solve_with_system, SolveConfig, Solution, SystemOperators};
use helmarc::{C64, GridSpec, PanelMesh};
use serde_json::json;
use std::path::Path;
use std::time::Instant;

pub struct SolveArtifacts {
    pub solution: Solution,
    pub metadata: serde_json::Value,
}

fn run_pipeline(
    rp: &ResolvedProblem,
    resolution: &helmarc::geometry::Resolution,
    nsub: usize,
    tol: f64,
) -> anyhow::Result<(PanelMesh, SystemOperators, Solution)> {
    let mesh = build_coarse_mesh(&rp.geometry, resolution, rp.problem.k)?;
    let t0 = Instant::now();
    let sys = build_system(&rp.problem, &mesh, nsub)?;
    let t_build = t0.elapsed().as_secs_f64();
    let config = SolveConfig { n_sub: nsub, tol, max_iter: rp.max_iter };
    let sol = solve_with_system(&rp.problem, &mesh, &sys, &config, t_build)?;
    Ok((mesh, sys, sol))
}

/// Full solve: writes solution.json, field.grid, and optionally
/// total.grid / error.grid under the output directory.
pub fn cmd_solve(rp: &ResolvedProblem) -> anyhow::Result<SolveArtifacts> {
    std::fs::create_dir_all(&rp.out_dir)
        .with_context(|| format!("creating {}", rp.out_dir.display()))?;
    let (mesh, sys, sol) = run_pipeline(rp, &rp.resolution, rp.nsub, rp.tol)?;

    let mut meta = json!({
        "n": mesh.num_nodes(),
        "panels": mesh.panels.len(),
        "k": rp.problem.k,
        "total_arc_length": rp.total_length,
        "nsub": rp.nsub,
        "tol": rp.tol,
        "converged": sol.converged(),
        "stagnated": sol.gmres.stop == helmarc::solver::GmresStop::Stagnated,
        "iterations": sol.gmres.iterations,
        "iterations_run": sol.gmres.iterations_run,
        "arnoldi_residual": sol.gmres.residuals.last().copied().unwrap_or(0.0),
        "true_residual": sol.gmres.true_residual,
        "timings": {
            "t_build": sol.timings.t_build,
            "t_solve": sol.timings.t_solve,
            "t_total": sol.timings.t_total,
        },
        "r4_deviation": sys.rs.iter().map(|ci| ci.blocks.r4_deviation).fold(0.0, f64::max),
    });

    let evaluator = FieldEvaluator::new(&mesh, &sol, &sys.rs)?;

    if let Some(reference) = &rp.reference {
        let z = C64::new(reference.target[0], reference.target[1]);
        let u = evaluator.eval_points(&[z], false)?[0];
        let mut target = json!({
            "point": reference.target,
            "value": [u.re, u.im],
        });
        if let Some(r) = reference.value {
            let err = (u - C64::new(r[0], r[1])).norm();
            target["reference"] = json!([r[0], r[1]]);
            target["abs_error"] = json!(err);
        }
        meta["target"] = target;
    }

    if let Some(grid) = &rp.grid {
        let spec = grid_spec(grid);
        let field = evaluator.eval_grid(&spec, false)?;
        gridio::write_raw(&rp.out_dir.join("field.grid"), &field)?;
        if grid.total_field {
            let total = evaluator.eval_grid(&spec, true)?;
            gridio::write_raw(&rp.out_dir.join("total.grid"), &total)?;
        }
        if grid.error_grid {
            let (ref_res, ref_nsub) = overresolved(rp);
            let (rmesh, rsys, rsol) = run_pipeline(rp, &ref_res, ref_nsub, rp.tol)?;
            let reval = FieldEvaluator::new(&rmesh, &rsol, &rsys.rs)?;
            let ref_field = reval.eval_grid(&spec, false)?;
            let e = error_grid(&field, &ref_field)?;
            meta["e2"] = json!(e.rel_l2);
            meta["reference_n"] = json!(rmesh.num_nodes());
            let egrid = helmarc::FieldGrid {
                spec: e.spec.clone(),
                values: e.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
                mask: e.mask.clone(),
            };
            gridio::write_raw(&rp.out_dir.join("error.grid"), &egrid)?;
        }
    }

    std::fs::write(
        rp.out_dir.join("solution.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(SolveArtifacts { solution: sol, metadata: meta })
}

// reference discretization: ~50% more points and refinement depth
fn overresolved(rp: &ResolvedProblem) -> (helmarc::geometry::Resolution, usize) {
    use helmarc::geometry::Resolution::*;
    let res = match &rp.resolution {
        PointsPerWavelength(p) => PointsPerWavelength(1.5 * p),
        UniformPanels(n) => UniformPanels((3 * n).div_ceil(2)),
        PerEdgePanels(v) => PerEdgePanels(v.iter().map(|n| (3 * n).div_ceil(2)).collect()),
    };
    (res, (3 * rp.nsub).div_ceil(2))
}

/// Error at the reference target as a function of n_sub.
pub fn cmd_sweep_nsub(rp: &ResolvedProblem, from: usize, to: usize) -> anyhow::Result<()> {
    anyhow::ensure!(from <= to, "empty n_sub range");
    let reference = rp
        .reference
        .as_ref()
        .context("sweep-nsub needs a [reference] section with a target point")?;
    let z = C64::new(reference.target[0], reference.target[1]);
    std::fs::create_dir_all(&rp.out_dir)?;

    let mesh = build_coarse_mesh(&rp.geometry, &rp.resolution, rp.problem.k)?;
    let (op_a, op_b) = helmarc::solver::select_operators(rp.problem.bc);
    let a = helmarc::quadrature::assemble(op_a, &mesh, rp.problem.k)?;
    let b = helmarc::quadrature::assemble(op_b, &mesh, rp.problem.k)?;

    let mut rows = Vec::new();
    for nsub in from..=to {
        let t0 = Instant::now();
        let rs: Vec<_> = (0..rp.geometry.vertices.len())
            .map(|v| helmarc::rcip::build_r(&mesh, v, rp.problem.k, (op_a, op_b), nsub))
            .collect::<helmarc::Result<_>>()?;
        let sys = SystemOperators { a: a.clone(), b: b.clone(), rs, n: mesh.num_nodes() };
        let t_build = t0.elapsed().as_secs_f64();
        let config = SolveConfig { n_sub: nsub, tol: rp.tol, max_iter: rp.max_iter };
        let sol = solve_with_system(&rp.problem, &mesh, &sys, &config, t_build)?;
        let evaluator = FieldEvaluator::new(&mesh, &sol, &sys.rs)?;
        let u = evaluator.eval_points(&[z], false)?[0];
        rows.push((nsub, u, sol));
    }
    let u_last = rows.last().unwrap().1;
    let reference_value = reference.value.map(|r| C64::new(r[0], r[1])).unwrap_or(u_last);

    let mut csv = String::from("n_sub,error,iterations,t_build,t_solve,t_total,n\n");
    println!("n_sub  error       iterations  t_total");
    for (nsub, u, sol) in &rows {
        let err = (u - reference_value).norm();
        csv.push_str(&format!(
            "{nsub},{err:.16e},{},{:.6},{:.6},{:.6},{}\n",
            sol.gmres.iterations,
            sol.timings.t_build,
            sol.timings.t_solve,
            sol.timings.t_total,
            mesh.num_nodes()
        ));
        println!(
            "{nsub:5}  {err:.3e}  {:10}  {:.3} s",
            sol.gmres.iterations, sol.timings.t_total
        );
    }
    std::fs::write(rp.out_dir.join("sweep_nsub.csv"), csv)?;
    Ok(())
}

/// Iterations, timings, and E2 against an overresolved reference as the
/// wavenumber scales through a list of L/lambda targets.
pub fn cmd_sweep_wavelength(rp: &ResolvedProblem, values: &[f64]) -> anyhow::Result<()> {
    anyhow::ensure!(!values.is_empty(), "empty L/lambda list");
    let grid = rp.grid.as_ref().context("sweep-wavelength needs a [grid] section")?;
    let spec = grid_spec(grid);
    std::fs::create_dir_all(&rp.out_dir)?;

    let mut csv = String::from("l_over_lambda,n,iterations,t_build,t_solve,t_total,e2\n");
    println!("L/lambda  N      iterations  E2         T_total");
    for &ll in values {
        let mut rp_k = rp.problem.clone();
        rp_k.k = std::f64::consts::TAU * ll / rp.total_length;
        let scaled = ResolvedProblem {
            geometry: rp.geometry.clone(),
            problem: rp_k,
            resolution: rp.resolution.clone(),
            nsub: rp.nsub,
            tol: rp.tol,
            max_iter: rp.max_iter,
            grid: None,
            reference: None,
            out_dir: rp.out_dir.clone(),
            total_length: rp.total_length,
        };
        let (mesh, sys, sol) = run_pipeline(&scaled, &scaled.resolution, scaled.nsub, scaled.tol)?;
        let evaluator = FieldEvaluator::new(&mesh, &sol, &sys.rs)?;
        let field = evaluator.eval_grid(&spec, false)?;
        let (rres, rnsub) = overresolved(&scaled);
        let (rmesh, rsys, rsol) = run_pipeline(&scaled, &rres, rnsub, scaled.tol)?;
        let reval = FieldEvaluator::new(&rmesh, &rsol, &rsys.rs)?;
        let e2 = error_grid(&field, &reval.eval_grid(&spec, false)?)?.rel_l2;
        csv.push_str(&format!(
            "{ll},{},{},{:.6},{:.6},{:.6},{e2:.6e}\n",
            mesh.num_nodes(),
            sol.gmres.iterations,
            sol.timings.t_build,
            sol.timings.t_solve,
            sol.timings.t_total
        ));
        println!(
            "{ll:8}  {:5}  {:10}  {e2:.3e}  {:.3} s",
            mesh.num_nodes(),
            sol.gmres.iterations,
            sol.timings.t_total
        );
    }
    std::fs::write(rp.out_dir.join("sweep_wavelength.csv"), csv)?;
    Ok(())
}

/// Convert a grid artifact between raw, text, and pgm representations.
pub fn cmd_emit_grid(
    input: &Path,
    format: &str,
    output: &Path,
    clamp_max: Option<f64>,
) -> anyhow::Result<()> {
    // sniff the input container
    let head = std::fs::read(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let grid = if head.starts_with(gridio::MAGIC) {
        gridio::read_raw(input)?
    } else {
        gridio::read_text(input)?
    };
    match format {
        "raw" => gridio::write_raw(output, &grid),
        "text" => gridio::write_text(output, &grid),
        "pgm" => gridio::write_pgm(output, &grid, clamp_max),
        other => anyhow::bail!("unknown grid format '{other}' (raw | text | pgm)"),
    }
}

/// One line per built-in geometry, with the constants the experiments pin.
pub fn cmd_presets() {
    println!("segment        straight segment (s, -0.2), s in [-1, 1]; length 2");
    println!("spiral         logarithmic spiral (e^s cos 5s, e^s sin 5s), s in [-1, 1]");
    println!("one-corner     parabola joined to a falling cosine arc at the corner (1, 1)");
    println!("corner-tiling  one-corner tiled horizontally; copies = 4 gives the");
    println!("               eight-corner curve (L/lambda = 200 at k = 83.58017152213590)");
    println!("y-shape        segments of lengths 10, 8, 8, top opening angle pi/2");
    println!("tree           recursive tree, lengths x0.8 and angles /1.1 per level;");
    println!("               levels = 3 gives the seven-branch curve with nine endpoints");
    println!("               (L/lambda = 200 at k = 13.57645917713826)");
    println!("circle         closed circle (no singular points)");
    println!("polyline       straight segments between listed points");
}
