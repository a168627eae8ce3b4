//! Independent oracles for the integration tests.
//!
//! Everything here deliberately avoids the production product-integration
//! path: closed-form antiderivatives in the complex plane for flat panels,
//! and an adaptive Simpson driver (with explicit singularity splitting)
//! for everything else.

#![allow(dead_code)]

use helmarc::C64;

/// Adaptive Simpson for complex integrands on [a, b].
pub fn simpson<F: Fn(f64) -> C64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> C64 {
    fn simpson_rule<F: Fn(f64) -> C64>(f: &F, a: f64, m: f64, b: f64) -> C64 {
        (f(a) + 4.0 * f(m) + f(b)) * ((b - a) / 6.0)
    }
    fn recurse<F: Fn(f64) -> C64>(
        f: &F,
        a: f64,
        b: f64,
        whole: C64,
        tol: f64,
        depth: u32,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let left = simpson_rule(f, a, 0.5 * (a + m), m);
        let right = simpson_rule(f, m, 0.5 * (m + b), b);
        let err = (left + right - whole).norm();
        // keep the local tolerance above the rounding floor of the
        // contributions themselves
        let floor = 1e-16 * (left.norm() + right.norm());
        if err < 15.0 * tol.max(floor) || depth > 42 {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, left, tol / 2.0, depth + 1)
                + recurse(f, m, b, right, tol / 2.0, depth + 1)
        }
    }
    let m = 0.5 * (a + b);
    recurse(&f, a, b, simpson_rule(&f, a, m, b), tol, 0)
}

/// Adaptive Simpson with an interior integrable singularity at s: splits
/// just off the singular point (the skipped sliver is O(eps ln eps)).
pub fn simpson_split<F: Fn(f64) -> C64 + Copy>(f: F, a: f64, b: f64, s: f64, tol: f64) -> C64 {
    assert!(a < s && s < b);
    let eps = 1e-18 * (b - a);
    simpson(f, a, s - eps, tol) + simpson(f, s + eps, b, tol)
}

/// Closed-form int_seg t^m/(t-z) dt along the straight segment from ta to
/// tb (principal value when z is interior to the segment).
pub fn flat_cauchy_moment(ta: C64, tb: C64, z: C64, m: usize, pv_on_segment: bool) -> C64 {
    // t^m/(t-z) = sum_{j<m} t^j z^{m-1-j} + z^m/(t-z)
    let mut total = C64::new(0.0, 0.0);
    for j in 0..m {
        let term = (powc(tb, j + 1) - powc(ta, j + 1)) / (j as f64 + 1.0);
        total += term * powc(z, m - 1 - j);
    }
    let log_term = if pv_on_segment {
        C64::new(((tb - z).norm() / (ta - z).norm()).ln(), 0.0)
    } else {
        // the subtended angle is below pi, so the principal log of the
        // ratio is the path-continuous value
        ((tb - z) / (ta - z)).ln()
    };
    total + powc(z, m) * log_term
}

/// Closed-form int_seg t^m/(t-z)^2 dt (finite part when z is interior).
pub fn flat_hyper_moment(ta: C64, tb: C64, z: C64, m: usize, pv_on_segment: bool) -> C64 {
    // t^m/(t-z)^2 = d/dt[-t^m/(t-z)] + m t^{m-1}/(t-z)
    let boundary = -powc(tb, m) / (tb - z) + powc(ta, m) / (ta - z);
    if m == 0 {
        return boundary;
    }
    boundary + m as f64 * flat_cauchy_moment(ta, tb, z, m - 1, pv_on_segment)
}

/// Closed-form int_seg t^m ln|t - z| dt along a straight segment, for z on
/// or off the segment line.
pub fn flat_log_moment(ta: C64, tb: C64, z: C64, m: usize) -> C64 {
    // parametrize t = ta + e s, s in [0, L] with unit e; then
    // |t - z| = |s - w| with w = (z - ta)/e.
    let len = (tb - ta).norm();
    let e = (tb - ta) / len;
    let w = (z - ta) / e;
    let mut total = C64::new(0.0, 0.0);
    for l in 0..=m {
        let c = binom(m, l) as f64 * powc(ta, m - l) * powc(e, l);
        total += c * log_moment_on_line(len, w, l);
    }
    total * e
}

// int_0^L s^l ln|s - w| ds, exact.
fn log_moment_on_line(len: f64, w: C64, l: usize) -> f64 {
    let lp = l as f64 + 1.0;
    let on_segment = w.im.abs() < 1e-14 * (1.0 + len) && w.re > 0.0 && w.re < len;
    if on_segment {
        // all-real endpoint formula; the antiderivative is continuous
        // through s = w because the prefactor vanishes there
        let a = w.re;
        let end = |s: f64| -> f64 {
            let d: f64 = s - a;
            if d == 0.0 {
                0.0
            } else {
                (s.powi(l as i32 + 1) - a.powi(l as i32 + 1)) * d.abs().ln()
            }
        };
        let mut poly = 0.0;
        for j in 0..=l {
            poly += a.powi((l - j) as i32) * len.powi(j as i32 + 1) / (j as f64 + 1.0);
        }
        (end(len) - end(0.0) - poly) / lp
    } else {
        // complex antiderivative with the principal log, continuous along
        // the real path; the real part of the result is the integral
        let end = |s: f64| -> C64 {
            let sw = C64::new(s, 0.0) - w;
            (powc(C64::new(s, 0.0), l + 1) - powc(w, l + 1)) * sw.ln()
        };
        let mut poly = C64::new(0.0, 0.0);
        for j in 0..=l {
            poly += powc(w, l - j) * (len.powi(j as i32 + 1) / (j as f64 + 1.0));
        }
        ((end(len) - end(0.0) - poly) / lp).re
    }
}

fn binom(n: usize, k: usize) -> u64 {
    let mut r = 1u64;
    for i in 0..k {
        r = r * (n - i) as u64 / (i + 1) as u64;
    }
    r
}

pub fn powc(z: C64, n: usize) -> C64 {
    let mut r = C64::new(1.0, 0.0);
    for _ in 0..n {
        r *= z;
    }
    r
}

/// Relative l2 difference of two complex vectors.
pub fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
