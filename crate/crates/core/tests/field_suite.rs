//! Field evaluation checks: the straight-segment reference value, boundary
//! residuals, invariances, and the interior Helmholtz residual.

mod common;

use helmarc::field::{error_grid, FieldEvaluator, GridSpec};
use helmarc::geometry::{
    assemble_geometry, build_coarse_mesh, build_geometry, GeometrySpec, Resolution,
};
use helmarc::solver::{
    build_system, incident_plane_wave, solve, BoundaryCondition, BoundaryData, ProblemSpec,
    SolveConfig,
};
use helmarc::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn segment_problem() -> ProblemSpec {
    ProblemSpec {
        bc: BoundaryCondition::Dirichlet,
        k: 3.0,
        data: BoundaryData::XPolynomial { coeffs: vec![-1.0, -3.0, 2.0, 4.0] },
    }
}

fn solve_segment(n_sub: usize) -> (helmarc::geometry::PanelMesh, helmarc::solver::Solution) {
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let problem = segment_problem();
    let sol = solve(&problem, &mesh, &SolveConfig { n_sub, tol: f64::EPSILON, max_iter: 200 })
        .unwrap();
    (mesh, sol)
}

/// Reference value for u(0.17, 0.62) on the straight-segment validation
/// problem, from 24-digit variable-precision arithmetic.
const U_REF: C64 = C64 { re: 0.02788626934981090, im: -0.75932847390327920 };

#[test]
fn straight_segment_reference_value() {
    let (mesh, sol) = solve_segment(40);
    let sys = build_system(&sol.problem, &mesh, 40).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let u = eval.eval_points(&[C64::new(0.17, 0.62)], false).unwrap()[0];
    let err = (u - U_REF).norm();
    assert!(err <= 2e-14, "u(r_targ) = {u}, err {err:e}");
}

#[test]
fn zero_density_gives_zero_field() {
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let problem = ProblemSpec {
        bc: BoundaryCondition::Dirichlet,
        k: 3.0,
        data: BoundaryData::Zero,
    };
    let sol = solve(&problem, &mesh, &SolveConfig { n_sub: 5, ..Default::default() }).unwrap();
    let sys = build_system(&problem, &mesh, 5).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let pts = [C64::new(0.3, 0.4), C64::new(-0.9, -0.21), C64::new(2.0, 0.0)];
    for u in eval.eval_points(&pts, false).unwrap() {
        assert_eq!(u, C64::new(0.0, 0.0));
    }
}

#[test]
fn far_targets_need_no_correction() {
    // at > 5 panel lengths the near-zone machinery must not alter values
    let (mesh, sol) = solve_segment(12);
    let sys = build_system(&sol.problem, &mesh, 12).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let panel_len = mesh.panel_arclength(0);
    let z = C64::new(0.1, 6.0 * panel_len);
    let corrected = eval.eval_points(&[z], false).unwrap()[0];
    // direct plain sum with the weight-corrected density
    let mut plain = C64::new(0.0, 0.0);
    for j in 0..mesh.num_nodes() {
        let src = helmarc::kernels::SourcePoint {
            z: mesh.z[j],
            normal: mesh.normal[j],
            dz: mesh.dz[j],
        };
        plain += helmarc::kernels::kernel(
            helmarc::kernels::OpKind::S,
            &helmarc::kernels::KernelPoint {
                source: src,
                target: helmarc::kernels::TargetPoint { z, normal: None },
            },
            3.0,
        )
        .unwrap()
            * mesh.weight[j]
            * sol.rho2_hat[j];
    }
    assert!((corrected - plain).norm() < 1e-12 * (1.0 + plain.norm()));
}

#[test]
fn dirichlet_boundary_residual_plane_wave() {
    // u_sc = -u_in on the curve; sample between nodes, including points
    // near the endpoints where the fine reconstruction takes over
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let theta = 3.0 * std::f64::consts::PI / 4.0;
    let problem = ProblemSpec {
        bc: BoundaryCondition::Dirichlet,
        k: 3.0,
        data: BoundaryData::PlaneWave { theta },
    };
    let sol =
        solve(&problem, &mesh, &SolveConfig { n_sub: 40, tol: 1e-14, max_iter: 200 }).unwrap();
    assert!(sol.converged());
    let sys = build_system(&problem, &mesh, 40).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let edge = &g.edges[0];
    let mut targets = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let u: f64 = rng.gen_range(0.003..0.997);
        targets.push(edge.position(u));
    }
    let usc = eval.eval_points(&targets, true).unwrap();
    let mut worst = 0.0f64;
    for (u, &z) in usc.iter().zip(&targets) {
        let res = (u + incident_plane_wave(3.0, theta, z)).norm();
        worst = worst.max(res);
    }
    assert!(worst <= 1e-9, "max |u_tot| on curve = {worst:e}");
}

#[test]
fn dirichlet_field_invariant_under_edge_reversal() {
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mut edges = g.edges.clone();
    edges[0].reverse();
    edges[0].v_lo = None;
    edges[0].v_hi = None;
    let g_rev = assemble_geometry(edges).unwrap();

    let spec = GridSpec { bbox: [-1.3, 1.3, 0.2, 1.1], nx: 12, ny: 8 };
    let mut grids = Vec::new();
    for geom in [g, g_rev] {
        let mesh = build_coarse_mesh(&geom, &Resolution::UniformPanels(6), 3.0).unwrap();
        let problem = ProblemSpec {
            bc: BoundaryCondition::Dirichlet,
            k: 3.0,
            data: BoundaryData::PlaneWave { theta: 0.9 },
        };
        let sol = solve(&problem, &mesh, &SolveConfig { n_sub: 30, tol: 1e-13, max_iter: 200 })
            .unwrap();
        let sys = build_system(&problem, &mesh, 30).unwrap();
        let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
        grids.push(eval.eval_grid(&spec, false).unwrap());
    }
    let e = error_grid(&grids[0], &grids[1]).unwrap();
    let max = e
        .values
        .iter()
        .zip(&e.mask)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max);
    assert!(max < 1e-11, "reversal changes field by {max:e}");
}

#[test]
fn interior_helmholtz_residual() {
    // (u_xx + u_yy + k^2 u) / (k^2 |u|) at interior points, fourth-order
    // five-point-per-axis differences with h = lambda/200
    let (mesh, sol) = solve_segment(30);
    let sys = build_system(&sol.problem, &mesh, 30).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let k = 3.0;
    let h = std::f64::consts::TAU / k / 200.0;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut pts = Vec::new();
    for _ in 0..20 {
        // stay away from the segment line y = -0.2
        let x: f64 = rng.gen_range(-1.2..1.2);
        let y: f64 = rng.gen_range(0.2..1.2);
        pts.push(C64::new(x, y));
    }
    let coef = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
    for z in pts {
        let mut stencil = Vec::new();
        for o in -2i32..=2 {
            stencil.push(z + C64::new(o as f64 * h, 0.0));
        }
        for o in -2i32..=2 {
            stencil.push(z + C64::new(0.0, o as f64 * h));
        }
        let vals = eval.eval_points(&stencil, false).unwrap();
        let mut lap = C64::new(0.0, 0.0);
        for i in 0..5 {
            lap += coef[i] * vals[i] + coef[i] * vals[5 + i];
        }
        lap /= h * h;
        let u = vals[2];
        let res = (lap + k * k * u).norm() / (k * k * u.norm());
        assert!(res <= 1e-5, "Helmholtz residual {res:e} at {z}");
    }
}

#[test]
fn single_layer_field_continuous_across_curve() {
    let (mesh, sol) = solve_segment(30);
    let sys = build_system(&sol.problem, &mesh, 30).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let g = mesh.geom.clone();
    let edge = &g.edges[0];
    let panel_len = mesh.panel_arclength(2);
    let mut pairs = Vec::new();
    for i in 1..10 {
        let u = 0.1 * i as f64;
        let z = edge.position(u);
        let n = edge.normal(u);
        let d = 1e-3 * panel_len;
        pairs.push((z + d * n, z - d * n));
    }
    let above: Vec<C64> = pairs.iter().map(|p| p.0).collect();
    let below: Vec<C64> = pairs.iter().map(|p| p.1).collect();
    let ua = eval.eval_points(&above, false).unwrap();
    let ub = eval.eval_points(&below, false).unwrap();
    let umax = ua.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (a, b) in ua.iter().zip(&ub) {
        assert!((a - b).norm() <= 1e-6 * umax, "jump {:e}", (a - b).norm());
    }
}

#[test]
fn exclusion_band_is_monotone() {
    let (mesh, sol) = solve_segment(10);
    let sys = build_system(&sol.problem, &mesh, 10).unwrap();
    let eval = FieldEvaluator::new(&mesh, &sol, &sys.rs).unwrap();
    let spec = GridSpec { bbox: [-1.2, 1.2, -0.5, 0.2], nx: 24, ny: 12 };
    let narrow = eval.eval_grid_with_band(&spec, false, 1e-3).unwrap();
    let wide = eval.eval_grid_with_band(&spec, false, 3e-2).unwrap();
    for i in 0..narrow.values.len() {
        if narrow.mask[i] {
            assert!(wide.mask[i], "wide band unmasked a masked point");
        }
        if !wide.mask[i] {
            assert_eq!(narrow.values[i], wide.values[i]);
        }
    }
}
