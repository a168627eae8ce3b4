//! Full (non-restarted) GMRES with modified Gram-Schmidt, selective
//! reorthogonalization, and stagnation detection.
//!
//! Termination is on the Arnoldi residual estimate; the true residual of
//! the returned iterate is reported alongside. On stagnation (relative
//! residual improvement below a threshold over a trailing window) the
//! best iterate found so far is returned, flagged.

use crate::linalg::{axpy, dot, norm2};
use crate::C64;

#[derive(Debug, Clone)]
pub struct GmresConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Stop when res(m) > stagnation_factor * res(m - stagnation_window).
    pub stagnation_window: usize,
    pub stagnation_factor: f64,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-12,
            max_iter: 400,
            stagnation_window: 10,
            stagnation_factor: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmresStop {
    Converged,
    Stagnated,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<C64>,
    /// Iteration at which the returned (best) iterate was produced.
    pub iterations: usize,
    /// Total Arnoldi steps taken.
    pub iterations_run: usize,
    /// Arnoldi residual estimates, one per iteration.
    pub residuals: Vec<f64>,
    pub stop: GmresStop,
    /// True relative residual of the returned iterate.
    pub true_residual: f64,
}

impl GmresResult {
    pub fn converged(&self) -> bool {
        self.stop == GmresStop::Converged
    }
}

/// Solve A x = b with A given as a matrix-free application.
pub fn gmres<F: FnMut(&[C64]) -> Vec<C64>>(
    mut matvec: F,
    b: &[C64],
    config: &GmresConfig,
) -> GmresResult {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return GmresResult {
            x: vec![C64::new(0.0, 0.0); n],
            iterations: 0,
            iterations_run: 0,
            residuals: Vec::new(),
            stop: GmresStop::Converged,
            true_residual: 0.0,
        };
    }
    let max_m = config.max_iter.min(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_m + 1);
    basis.push(b.iter().map(|v| v / b_norm).collect());
    // rotated Hessenberg columns (upper triangular) and rotated rhs
    let mut r_cols: Vec<Vec<C64>> = Vec::with_capacity(max_m);
    let mut g = vec![C64::new(0.0, 0.0); max_m + 1];
    g[0] = C64::new(b_norm, 0.0);
    let mut cs: Vec<C64> = Vec::with_capacity(max_m);
    let mut sn: Vec<C64> = Vec::with_capacity(max_m);
    let mut residuals: Vec<f64> = Vec::with_capacity(max_m);
    let mut stop = GmresStop::MaxIter;
    let mut m = 0;

    while m < max_m {
        let mut w = matvec(&basis[m]);
        let w_norm_before = norm2(&w);
        let mut h = vec![C64::new(0.0, 0.0); m + 2];
        for (j, v) in basis.iter().enumerate().take(m + 1) {
            let hj = conj_dot(v, &w);
            h[j] = hj;
            axpy(-hj, v, &mut w);
        }
        let mut w_norm = norm2(&w);
        // one reorthogonalization pass on significant cancellation
        if w_norm < 0.7 * w_norm_before {
            for (j, v) in basis.iter().enumerate().take(m + 1) {
                let corr = conj_dot(v, &w);
                h[j] += corr;
                axpy(-corr, v, &mut w);
            }
            w_norm = norm2(&w);
        }
        h[m + 1] = C64::new(w_norm, 0.0);

        // previous Givens rotations
        for j in 0..m {
            let t = cs[j].conj() * h[j] + sn[j].conj() * h[j + 1];
            h[j + 1] = -sn[j] * h[j] + cs[j] * h[j + 1];
            h[j] = t;
        }
        // new rotation
        let denom = (h[m].norm_sqr() + h[m + 1].norm_sqr()).sqrt();
        let (c, s) = if denom == 0.0 {
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (h[m] / denom, h[m + 1] / denom)
        };
        cs.push(c);
        sn.push(s);
        // rotated diagonal entry is |(h_m, h_{m+1})| by construction
        h[m] = C64::new(denom, 0.0);
        h[m + 1] = C64::new(0.0, 0.0);
        let gm = g[m];
        g[m] = c.conj() * gm;
        g[m + 1] = -s * gm;
        r_cols.push(h);

        let res = g[m + 1].norm() / b_norm;
        residuals.push(res);
        m += 1;

        if res <= config.tol {
            stop = GmresStop::Converged;
            break;
        }
        let happy = w_norm < 1e-14 * b_norm;
        if happy {
            stop = GmresStop::Converged;
            break;
        }
        if m > config.stagnation_window {
            let past = residuals[m - 1 - config.stagnation_window];
            if res > config.stagnation_factor * past {
                stop = GmresStop::Stagnated;
                break;
            }
        }
        basis.push(w.iter().map(|v| v / w_norm).collect());
    }

    // best iterate: the iteration with the smallest residual estimate
    let best = residuals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i + 1)
        .unwrap_or(0);
    let x = assemble_iterate(&basis, &r_cols, &g, best, n);
    // true residual of the returned iterate
    let ax = matvec(&x);
    let true_res = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / b_norm;
    GmresResult {
        x,
        iterations: best,
        iterations_run: m,
        residuals,
        stop,
        true_residual: true_res,
    }
}

fn conj_dot(a: &[C64], b: &[C64]) -> C64 {
    let conj: Vec<C64> = a.iter().map(|v| v.conj()).collect();
    dot(&conj, b)
}

fn assemble_iterate(
    basis: &[Vec<C64>],
    r_cols: &[Vec<C64>],
    g: &[C64],
    m: usize,
    n: usize,
) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= r_cols[j][i] * y[j];
        }
        y[i] = s / r_cols[i][i];
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for (j, yj) in y.iter().enumerate() {
        axpy(*yj, &basis[j], &mut x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;

    #[test]
    fn identity_converges_in_one_iteration() {
        let b: Vec<C64> = (0..9).map(|i| C64::new(i as f64, -2.0)).collect();
        let out = gmres(|x| x.to_vec(), &b, &GmresConfig::default());
        assert!(out.converged());
        assert_eq!(out.iterations, 1);
        for (xi, bi) in out.x.iter().zip(&b) {
            assert!((xi - bi).norm() < 1e-13);
        }
    }

    #[test]
    fn dense_solve_matches_lu() {
        let n = 24;
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = C64::new(
                    0.03 * ((i * 3 + j * 7) % 11) as f64,
                    0.02 * ((i + 5 * j) % 7) as f64,
                );
            }
            a[(i, i)] += C64::new(2.0, 0.4);
        }
        let xref: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (1 + i) as f64, 0.1)).collect();
        let b = a.matvec(&xref);
        let out = gmres(|x| a.matvec(x), &b, &GmresConfig { tol: 1e-13, ..Default::default() });
        assert!(out.converged());
        assert!(out.true_residual < 1e-12);
        for (xi, ri) in out.x.iter().zip(&xref) {
            assert!((xi - ri).norm() < 1e-10);
        }
    }

    #[test]
    fn stagnation_detected_on_shift_matrix() {
        // for the cyclic shift with rhs e1 the GMRES residual stays at 1
        // until the full dimension is reached; the stagnation guard must
        // cut the iteration short
        let n = 40;
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[((i + 1) % n, i)] = C64::new(1.0, 0.0);
        }
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[0] = C64::new(1.0, 0.0);
        let out = gmres(
            |x| a.matvec(x),
            &b,
            &GmresConfig { tol: 1e-14, max_iter: n - 2, ..Default::default() },
        );
        assert_eq!(out.stop, GmresStop::Stagnated);
        assert!(out.iterations_run <= 12, "stopped at {}", out.iterations_run);
        assert!(out.iterations <= out.iterations_run);
    }

    #[test]
    fn zero_rhs_is_trivial() {
        let b = vec![C64::new(0.0, 0.0); 5];
        let out = gmres(|x| x.to_vec(), &b, &GmresConfig::default());
        assert!(out.converged());
        assert_eq!(out.iterations, 0);
    }
}
