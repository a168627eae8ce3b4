use helmarc::geometry::{build_coarse_mesh, build_geometry, GeometrySpec, Resolution};
use helmarc::solver::*;
use helmarc::C64;

fn main() {
    let g = build_geometry(&GeometrySpec::Segment).unwrap();
    for ll in [50.0, 100.0, 200.0] {
        let k = std::f64::consts::PI * ll;
        let mesh = build_coarse_mesh(&g, &Resolution::PointsPerWavelength(8.0), k).unwrap();
        let problem = ProblemSpec { bc: BoundaryCondition::Dirichlet, k, data: BoundaryData::PlaneWave { theta: 2.356194490192345 } };
        let sys = build_system(&problem, &mesh, 40).unwrap();
        let gvec = rhs_vector(&problem, &mesh);
        let n = sys.n;
        let d: Vec<f64> = (0..n).map(|i| mesh.weight[i].sqrt()).collect();
        // plain
        let plain = gmres(|x| sys.reduced_matvec(x), &gvec, &GmresConfig { tol: 1e-6, max_iter: 200, ..Default::default() });
        // sqrt-weight similarity: solve D M D^-1 (D x) = D g
        let gw: Vec<C64> = gvec.iter().zip(&d).map(|(g, di)| g * *di).collect();
        let weighted = gmres(|x| {
            let xi: Vec<C64> = x.iter().zip(&d).map(|(v, di)| v / *di).collect();
            let y = sys.reduced_matvec(&xi);
            y.iter().zip(&d).map(|(v, di)| v * *di).collect()
        }, &gw, &GmresConfig { tol: 1e-6, max_iter: 200, ..Default::default() });
        println!("L/lambda={ll}: plain its={} weighted its={}", plain.iterations, weighted.iterations);
    }
}
