//! Reduced-system checks: losslessness at zero refinement, equivalence
//! with the expanded two-density system, and the reference validation
//! setup on the straight segment.

mod common;

use helmarc::geometry::{build_coarse_mesh, build_geometry, GeometrySpec, Resolution};
use helmarc::linalg::{CMat, LuFactors};
use helmarc::quadrature::assemble_dense_full;
use helmarc::solver::{
    build_system, gmres, rhs_vector, select_operators, solve, BoundaryCondition, BoundaryData,
    GmresConfig, ProblemSpec, SolveConfig,
};
use helmarc::C64;

fn straight_segment_problem() -> ProblemSpec {
    // g(x) = 4x^3 + 2x^2 - 3x - 1
    ProblemSpec {
        bc: BoundaryCondition::Dirichlet,
        k: 3.0,
        data: BoundaryData::XPolynomial { coeffs: vec![-1.0, -3.0, 2.0, 4.0] },
    }
}

// Solve the uncompressed coarse block system [[0, A], [B, I]] (rho1, rho2)
// = (g, 0) with fully corrected dense operators.
fn solve_uncompressed(
    problem: &ProblemSpec,
    mesh: &helmarc::geometry::PanelMesh,
) -> (Vec<C64>, Vec<C64>) {
    let (op_a, op_b) = select_operators(problem.bc);
    let a = assemble_dense_full(op_a, mesh, problem.k).unwrap();
    let b = assemble_dense_full(op_b, mesh, problem.k).unwrap();
    let n = mesh.num_nodes();
    let mut m = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            m[(i, n + j)] = a[(i, j)];
            m[(n + i, j)] = b[(i, j)];
        }
        m[(n + i, n + i)] = C64::new(1.0, 0.0);
    }
    let g = rhs_vector(problem, mesh);
    let mut rhs = vec![C64::new(0.0, 0.0); 2 * n];
    rhs[..n].copy_from_slice(&g);
    let lu = LuFactors::new(&m).unwrap();
    let sol = lu.solve(&rhs);
    (sol[..n].to_vec(), sol[n..].to_vec())
}

#[test]
fn nsub_zero_is_lossless_for_every_vertex_kind() {
    for (spec, panels) in [
        (GeometrySpec::Segment, 6usize),
        (GeometrySpec::OneCorner, 5),
        (GeometrySpec::YShape, 4),
    ] {
        let g = build_geometry(&spec).unwrap();
        let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(panels), 3.0).unwrap();
        let problem = ProblemSpec {
            bc: BoundaryCondition::Dirichlet,
            k: 3.0,
            data: BoundaryData::PlaneWave { theta: 0.7 },
        };
        let (rho1_direct, rho2_direct) = solve_uncompressed(&problem, &mesh);
        let sol = solve(
            &problem,
            &mesh,
            &SolveConfig { n_sub: 0, tol: 1e-14, max_iter: 400 },
        )
        .unwrap();
        assert!(sol.converged(), "{spec:?} did not converge");
        // at zero refinement the weight-corrected densities are the
        // actual densities of the uncompressed system
        let scale = rho1_direct.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..mesh.num_nodes() {
            worst = worst.max((sol.rho1_hat[i] - rho1_direct[i]).norm());
            worst = worst.max((sol.rho2_hat[i] - rho2_direct[i]).norm());
        }
        assert!(
            worst <= 1e-11 * (1.0 + scale),
            "{spec:?}: max density deviation {worst:e} (scale {scale:e})"
        );
    }
}

#[test]
fn reduced_equals_expanded_system() {
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let problem = straight_segment_problem();
    let n = mesh.num_nodes();
    let sys = build_system(&problem, &mesh, 10).unwrap();
    let gvec = rhs_vector(&problem, &mesh);

    // reduced solve
    let sol = solve(&problem, &mesh, &SolveConfig { n_sub: 10, tol: 1e-13, max_iter: 300 })
        .unwrap();
    assert!(sol.converged());

    // expanded solve of the same compressed formulation
    let mut rhs2 = vec![C64::new(0.0, 0.0); 2 * n];
    rhs2[..n].copy_from_slice(&gvec);
    let out = gmres(
        |x| sys.expanded_matvec(x),
        &rhs2,
        &GmresConfig { tol: 1e-13, max_iter: 400, ..Default::default() },
    );
    assert!(out.converged());
    let rho1_exp = &out.x[..n];

    // rho~1 agrees off Gamma* (and everywhere, since both represent the
    // same transformed density)
    let star: Vec<usize> = sys.rs.iter().flat_map(|ci| ci.star_nodes.clone()).collect();
    let scale = rho1_exp.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..n {
        if !star.contains(&i) {
            assert!(
                (sol.rho1_tilde[i] - rho1_exp[i]).norm() <= 1e-10 * (1.0 + scale),
                "node {i}: {} vs {}",
                sol.rho1_tilde[i],
                rho1_exp[i]
            );
        }
    }
}

#[test]
fn matvec_collapses_without_singular_points() {
    // closed smooth curve: Gamma* is empty, the reduced matvec is A(-B)x
    let g = build_geometry(&GeometrySpec::Circle { center: [0.0, 0.0], radius: 1.0 }).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(12), 3.0).unwrap();
    let problem = ProblemSpec {
        bc: BoundaryCondition::Dirichlet,
        k: 3.0,
        data: BoundaryData::Zero,
    };
    let sys = build_system(&problem, &mesh, 0).unwrap();
    assert!(sys.rs.is_empty());
    let n = sys.n;
    let x: Vec<C64> = (0..n)
        .map(|i| {
            let th = mesh.z[i].im.atan2(mesh.z[i].re);
            (C64::i() * 2.0 * th).exp()
        })
        .collect();
    let lhs = sys.reduced_matvec(&x);
    let bx = sys.b.apply_full(&x);
    let want = sys.a.apply_full(&bx.iter().map(|v| -v).collect::<Vec<_>>());
    let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..n {
        assert!((lhs[i] - want[i]).norm() <= 1e-12 * (1.0 + scale));
    }
}

#[test]
fn validation_segment_iteration_count() {
    // straight segment, k = 3, 6 coarse panels, n_sub = 40, machine-eps
    // tolerance: full convergence takes 17 iterations, plus or minus two
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let problem = straight_segment_problem();
    let sol = solve(
        &problem,
        &mesh,
        &SolveConfig { n_sub: 40, tol: f64::EPSILON, max_iter: 200 },
    )
    .unwrap();
    let iters = sol.gmres.iterations;
    assert!(
        (15..=19).contains(&iters),
        "iterations = {iters}, residuals = {:?}",
        sol.gmres.residuals
    );
    assert!(sol.gmres.residuals.last().unwrap() < &1e-13);
}

#[test]
fn density_has_inverse_sqrt_endpoint_profile() {
    // Dirichlet on the segment: the single-layer density grows like
    // r^(-1/2) toward the endpoint; fit the innermost dyadic levels
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    let mesh = build_coarse_mesh(&g, &Resolution::UniformPanels(6), 3.0).unwrap();
    let problem = straight_segment_problem();
    let n_sub = 30;
    let sol = solve(&problem, &mesh, &SolveConfig { n_sub, tol: 1e-13, max_iter: 200 }).unwrap();
    assert!(sol.converged());
    let sys = build_system(&problem, &mesh, n_sub).unwrap();
    let ci = &sys.rs[0];
    let q = ci.q();
    let mut rho_star = vec![C64::new(0.0, 0.0); 2 * q];
    for (li, &gi) in ci.star_nodes.iter().enumerate() {
        rho_star[li] = sol.rho1_tilde[gi];
        rho_star[q + li] = sol.rho2_tilde[gi];
    }
    let fine = helmarc::rcip::reconstruct_fine_density(ci, &rho_star).unwrap();
    // node-wise |rho2| against distance to the vertex (vertex-centered
    // coordinates), over the innermost 10 dyadic levels
    let mut pts: Vec<(f64, f64)> = (0..fine.mesh.num_nodes())
        .map(|j| (fine.mesh.z[j].norm(), fine.rho2[j].norm()))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let coarse_width = mesh.panels[0].d1 - mesh.panels[0].d0;
    let r_max = coarse_width * 0.5f64.powi(n_sub as i32 - 10);
    let inner: Vec<(f64, f64)> = pts.into_iter().filter(|&(r, _)| r < r_max).collect();
    assert!(inner.len() > 50, "too few nodes in the fit window");
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(r, v) in &inner {
        let (x, y) = (r.ln(), v.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let m = inner.len() as f64;
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    assert!(
        (slope + 0.5).abs() < 0.05,
        "endpoint density log-log slope {slope}"
    );
}
