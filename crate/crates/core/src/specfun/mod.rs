//! Real-argument Bessel/Hankel functions with log-split components,
//! Gauss-Legendre rules, and polynomial interpolation matrices.
//!
//! All operations are pure and reentrant.

mod bessel;

pub use bessel::{
    j0, j0 as bessel_j0, j1, j1_over_x, y0, y0_smooth, y1, y1_regularized, y1_regularized_over_x,
    EULER_GAMMA,
};

use crate::{Error, Result};
use std::sync::OnceLock;

/// J_n(x) for n in {0, 1}.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    match order {
        0 => bessel::j0(x),
        1 => bessel::j1(x),
        _ => panic!("bessel_j supports orders 0 and 1 only"),
    }
}

/// Y_n(x) for n in {0, 1}; x must be positive.
pub fn bessel_y(order: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("bessel_y requires x > 0, got {x}")));
    }
    Ok(match order {
        0 => bessel::y0(x),
        1 => bessel::y1(x),
        _ => panic!("bessel_y supports orders 0 and 1 only"),
    })
}

/// Split Y_n(x) = (2/pi) ln(x/2) J_n(x) + smooth_part.
///
/// Returns `(smooth_part, log_coefficient)` with
/// `log_coefficient = (2/pi) J_n(x)`. The smooth part is analytic through
/// x = 0 for n = 0; for n = 1 it carries the -2/(pi x) pole.
pub fn y_log_split(order: u32, x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    let log_coef = 2.0 / std::f64::consts::PI * bessel_j(order, x);
    let smooth = match order {
        0 => bessel::y0_smooth(x),
        1 => bessel::y1_regularized(x) - 2.0 / (std::f64::consts::PI * x),
        _ => panic!("y_log_split supports orders 0 and 1 only"),
    };
    (smooth, log_coef)
}

/// A quadrature rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate f over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

/// Legendre P_n(x) and its derivative.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p = x;
    for m in 1..n {
        let mf = m as f64;
        let p_next = ((2.0 * mf + 1.0) * x * p - mf * p_prev) / (mf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Evaluate P_0..P_{nmax}(x).
pub fn legendre_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax == 0 {
        return out;
    }
    out.push(x);
    for m in 1..nmax {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * x * out[m] - mf * out[m - 1]) / (mf + 1.0);
        out.push(next);
    }
    out
}

/// Monomial coefficients of P_0..P_{nmax}: row n holds c with
/// P_n(x) = sum_m c[m] x^m. Coefficients are dyadic rationals, exact in f64
/// for the orders used here.
pub fn legendre_coefficients(nmax: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(nmax + 1);
    rows.push(vec![1.0]);
    if nmax == 0 {
        return rows;
    }
    rows.push(vec![0.0, 1.0]);
    for n in 1..nmax {
        let nf = n as f64;
        let mut next = vec![0.0; n + 2];
        for (m, &c) in rows[n].iter().enumerate() {
            next[m + 1] += (2.0 * nf + 1.0) / (nf + 1.0) * c;
        }
        for (m, &c) in rows[n - 1].iter().enumerate() {
            next[m] -= nf / (nf + 1.0) * c;
        }
        rows.push(next);
    }
    rows
}

/// General Gauss-Legendre rule, computed by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> QuadRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_pair(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    QuadRule { nodes, weights }
}

/// The 16-point Gauss-Legendre rule on [-1, 1], exact for degree <= 31.
pub fn gauss_legendre_16() -> QuadRule {
    static RULE: OnceLock<QuadRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16)).clone()
}

/// Dense interpolation matrix: values on `src` nodes to values on `dst`
/// nodes by polynomial interpolation of degree src.len() - 1.
#[derive(Debug, Clone)]
pub struct InterpMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl InterpMatrix {
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn apply<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        assert_eq!(values.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let row = self.row(i);
                let mut acc = T::default();
                for (v, w) in values.iter().zip(row) {
                    acc = acc + *v * *w;
                }
                acc
            })
            .collect()
    }
}

/// Barycentric Lagrange interpolation matrix from `src` to `dst` nodes.
pub fn interp_matrix(src: &[f64], dst: &[f64]) -> Result<InterpMatrix> {
    let n = src.len();
    let mut bary = vec![1.0; n];
    for j in 0..n {
        for m in 0..n {
            if m != j {
                let d = src[j] - src[m];
                if d == 0.0 {
                    return Err(Error::Domain(format!(
                        "interp_matrix: duplicate source nodes at {}",
                        src[j]
                    )));
                }
                bary[j] /= d;
            }
        }
    }
    let mut data = vec![0.0; dst.len() * n];
    for (i, &t) in dst.iter().enumerate() {
        let row = &mut data[i * n..(i + 1) * n];
        if let Some(j) = src.iter().position(|&s| s == t) {
            row[j] = 1.0;
            continue;
        }
        let mut denom = 0.0;
        for j in 0..n {
            let term = bary[j] / (t - src[j]);
            row[j] = term;
            denom += term;
        }
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    Ok(InterpMatrix { nrows: dst.len(), ncols: n, data })
}

/// Adaptive quadrature by interval bisection with paired Gauss rules.
/// Intended for smooth or mildly singular integrands; the error estimate
/// per interval is |G32 - G16|.
pub fn adaptive_quadrature<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    static RULES: OnceLock<(QuadRule, QuadRule)> = OnceLock::new();
    let (g16, g32) = RULES.get_or_init(|| (gauss_legendre(16), gauss_legendre(32)));
    let mut total = 0.0;
    // explicit stack of (a, b, depth)
    let mut stack = vec![(a, b, 0u32)];
    while let Some((a, b, depth)) = stack.pop() {
        let coarse = g16.integrate(a, b, &mut f);
        let fine = g32.integrate(a, b, &mut f);
        let err = (fine - coarse).abs();
        if err <= tol * (1.0 + fine.abs()) * 0.5f64.powi(depth.min(30) as i32) || depth >= 48 {
            total += fine;
        } else {
            let mid = 0.5 * (a + b);
            stack.push((a, mid, depth + 1));
            stack.push((mid, b, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gl16_basic_properties() {
        let rule = gauss_legendre_16();
        assert_eq!(rule.len(), 16);
        // sum of weights = measure of [-1,1]
        let wsum: f64 = rule.weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-15);
        // strictly increasing, antisymmetric nodes; symmetric weights
        for i in 1..16 {
            assert!(rule.nodes[i] > rule.nodes[i - 1]);
        }
        for i in 0..16 {
            assert!((rule.nodes[i] + rule.nodes[15 - i]).abs() < 1e-15);
            assert!((rule.weights[i] - rule.weights[15 - i]).abs() < 1e-16);
            assert!(rule.weights[i] > 0.0);
        }
    }

    #[test]
    fn gl16_monomial_exactness() {
        let rule = gauss_legendre_16();
        for deg in 0..=31 {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "degree {deg}: {got} vs {exact}");
        }
        // spot values from the op contract
        let t2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
        assert!((t2 - 2.0 / 3.0).abs() < 1e-15);
        let t31: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(x, w)| w * x.powi(31))
            .sum();
        assert!(t31.abs() < 1e-15);
    }

    #[test]
    fn interp_identity_and_poly_reproduction() {
        let src = gauss_legendre_16().nodes;
        let eye = interp_matrix(&src, &src).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((eye.row(i)[j] - want).abs() < 1e-14);
            }
        }
        // t^5 reproduced on shifted nodes
        let dst: Vec<f64> = (0..20).map(|i| -1.0 + 2.0 * i as f64 / 19.0).collect();
        let m = interp_matrix(&src, &dst).unwrap();
        let vals: Vec<f64> = src.iter().map(|t| t.powi(5)).collect();
        let out = m.apply(&vals);
        for (y, t) in out.iter().zip(&dst) {
            assert!((y - t.powi(5)).abs() < 1e-13);
        }
        // row sums = 1 (interpolation of the constant)
        for i in 0..m.nrows {
            let s: f64 = m.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn interp_duplicate_nodes_rejected() {
        let src = [0.0, 0.5, 0.5, 1.0];
        assert!(interp_matrix(&src, &[0.25]).is_err());
    }

    #[test]
    fn y_log_split_named_values() {
        // recombination at x = 0.37
        let (smooth, coef) = y_log_split(0, 0.37);
        let rec = smooth + (0.37f64 / 2.0).ln() * coef;
        assert!((rec - y0(0.37)).abs() < 1e-14);
        // log coefficient at x = 1 equals (2/pi) J0(1)
        let (_, c) = y_log_split(0, 1.0);
        assert!((c - 2.0 / std::f64::consts::PI * 0.7651976865579666).abs() < 1e-15);
        // J0(0) = 1, frozen series values
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert!((bessel_j(0, 1.0) - 0.7651976865579666).abs() < 1e-15);
        assert!((bessel_y(0, 1.0).unwrap() - 0.08825696421567696).abs() < 1e-15);
        assert!(bessel_y(0, 0.0).is_err());
        assert!(bessel_y(1, -2.0).is_err());
    }

    #[test]
    fn adaptive_quadrature_smooth_and_kinked() {
        let v = adaptive_quadrature(|x| x.cos(), 0.0, 1.0, 1e-13);
        assert!((v - 1.0f64.sin()).abs() < 1e-13);
        // integrable log singularity at an interior point
        let v = adaptive_quadrature(|x: f64| (x - 0.3).abs().ln(), -1.0, 1.0, 1e-12);
        // exact: (1-a)ln(1-a) + (1+a)ln(1+a) - 2 at a = 0.3
        let exact = 0.7f64 * 0.7f64.ln() + 1.3 * 1.3f64.ln() - 2.0;
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
    }

    #[test]
    fn legendre_coefficient_table_consistency() {
        let table = legendre_coefficients(15);
        for (n, row) in table.iter().enumerate() {
            for &x in &[-0.9f64, -0.3, 0.2, 0.77] {
                let via_coef: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c * x.powi(m as i32))
                    .sum();
                let direct = legendre_all(n, x)[n];
                assert!((via_coef - direct).abs() < 1e-12, "P_{n}({x})");
            }
        }
    }

    proptest! {
        #[test]
        fn y_log_split_recombination_random(x in 1e-6f64..4.0) {
            for order in 0..2u32 {
                let (smooth, coef) = y_log_split(order, x);
                let rec = smooth + (x / 2.0).ln() * coef;
                let want = bessel_y(order, x).unwrap();
                prop_assert!((rec - want).abs() <= 1e-13 * (1.0 + want.abs()));
            }
        }
    }
}
