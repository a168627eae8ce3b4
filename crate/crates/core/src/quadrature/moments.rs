//! Product-integration moments in the panel parameter frame.
//!
//! For a target z near a panel, the complex preimage u* with tau(u*) = z
//! is found by Newton iteration on the analytically continued
//! parametrization. Every singular factor is then written as
//!
//! ```text
//! ln|tau(v) - z|   = ln|v - u*|     + ln|psi(v)|
//! 1/(tau(v) - z)   = 1/((v - u*) psi(v))
//! 1/(tau(v) - z)^2 = 1/((v - u*)^2 psi(v)^2)
//! ```
//!
//! with psi(v) = (tau(v) - z)/(v - u*) smooth and nonvanishing along the
//! panel. The moments of Legendre polynomials against ln|v - u*|,
//! 1/(v - u*), and 1/(v - u*)^2 on [-1, 1] are generated by three-term
//! recurrences (the log moments follow from the Cauchy ones because the
//! antiderivative (P_{n+1} - P_{n-1})/(2n+1) vanishes at both endpoints).
//! The recurrences are used inside the Bernstein ellipse rho < 1.4, where
//! their growth is harmless; outside, the integrands are analytic and a
//! 96-point Gauss rule evaluates the moments directly to full precision.
//! Weights exact on polynomials of degree <= 15 follow by pairing the
//! moments with the discrete Legendre analysis on the Gauss nodes, which
//! involves only well-scaled quantities.
//!
//! When z lies on the panel (u* real in [-1, 1]) the Cauchy moments are
//! principal values and the hypersingular moments Hadamard finite parts;
//! both drop out of the same endpoint formulas.

use crate::geometry::{PanelMesh, NODES_PER_PANEL};
use crate::specfun::{gauss_legendre, gauss_legendre_16, legendre_all};
use crate::C64;
use std::sync::OnceLock;

const N: usize = NODES_PER_PANEL;
// Targets with Bernstein parameter below this use the recursions.
const RHO_RECURSION: f64 = 1.4;
// |Im u*| below this (after Newton on a target known to lie on the curve)
// counts as on-path.
const ON_PATH_IM: f64 = 1e-12;

/// Everything the channel corrections need about one (target, panel) pair.
#[derive(Debug, Clone)]
pub struct TargetContext {
    /// Panel-local parameter preimage of the target.
    pub ustar: C64,
    /// Principal-value / finite-part regime (target on this panel's arc).
    pub on_path: bool,
    /// Set when the target coincides with quadrature node j of the panel.
    pub coincident: Option<usize>,
    /// psi(v_j) = (t_j - z)/(v_j - u*), with the velocity limit at a
    /// coincident node.
    pub psi: [C64; N],
    pub ln_psi_abs: [f64; N],
    /// Weights for int p(v) ln|v - u*| dv, p of degree <= 15.
    pub w_log: [f64; N],
    /// Weights for int p(v)/(v - u*) dv.
    pub w_cau: [C64; N],
    /// Weights for int p(v)/(v - u*)^2 dv.
    pub w_hyp: [C64; N],
}

// Fixed map from Legendre moments to nodal weights:
// w_j = glw_j * sum_n (2n+1)/2 P_n(v_j) Mhat_n.
fn node_matrix() -> &'static [[f64; N]; N] {
    static MAP: OnceLock<[[f64; N]; N]> = OnceLock::new();
    MAP.get_or_init(|| {
        let rule = gauss_legendre_16();
        let mut map = [[0.0; N]; N];
        for j in 0..N {
            let pn = legendre_all(N - 1, rule.nodes[j]);
            for (n, p) in pn.iter().enumerate() {
                map[j][n] = rule.weights[j] * (2.0 * n as f64 + 1.0) / 2.0 * p;
            }
        }
        map
    })
}

// 96-point Gauss rule with P_0..P_16 tabulated at its nodes.
fn far_rule() -> &'static (crate::specfun::QuadRule, Vec<Vec<f64>>) {
    static RULE: OnceLock<(crate::specfun::QuadRule, Vec<Vec<f64>>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let rule = gauss_legendre(96);
        let table = rule.nodes.iter().map(|&x| legendre_all(N, x)).collect();
        (rule, table)
    })
}

fn weights_from_moments_c(m: &[C64; N]) -> [C64; N] {
    let map = node_matrix();
    let mut w = [C64::new(0.0, 0.0); N];
    for j in 0..N {
        let mut s = C64::new(0.0, 0.0);
        for n in 0..N {
            s += map[j][n] * m[n];
        }
        w[j] = s;
    }
    w
}

fn weights_from_moments_r(m: &[f64; N]) -> [f64; N] {
    let map = node_matrix();
    let mut w = [0.0; N];
    for j in 0..N {
        let mut s = 0.0;
        for n in 0..N {
            s += map[j][n] * m[n];
        }
        w[j] = s;
    }
    w
}

// Bernstein ellipse parameter of w relative to [-1, 1].
fn bernstein_rho(w: C64) -> f64 {
    let s = (w * w - C64::new(1.0, 0.0)).sqrt();
    (w + s).norm().max((w - s).norm())
}

/// Legendre moments (to order 16 for the Cauchy family, 15 for the rest)
/// of the three singular factors at pole w.
fn legendre_moments(w: C64, on_path: bool) -> ([C64; N + 1], [C64; N], [f64; N]) {
    let mut q = [C64::new(0.0, 0.0); N + 1];
    let mut r = [C64::new(0.0, 0.0); N];
    let mut l = [0.0; N];
    if !on_path && bernstein_rho(w) >= RHO_RECURSION {
        // direct quadrature; everything is analytic here
        let (rule, ptab) = far_rule();
        for ((x, wt), pn) in rule.nodes.iter().zip(&rule.weights).zip(ptab) {
            let d = C64::new(*x, 0.0) - w;
            let inv = wt / d;
            let inv2 = inv / d;
            let lnd = wt * d.norm().ln();
            for n in 0..N {
                q[n] += pn[n] * inv;
                r[n] += pn[n] * inv2;
                l[n] += pn[n] * lnd;
            }
            q[N] += pn[N] * inv;
        }
        return (q, r, l);
    }
    let one = C64::new(1.0, 0.0);
    let (q0, r0, l0) = if on_path {
        let a = w.re;
        (
            C64::new(((1.0 - a) / (1.0 + a)).ln(), 0.0),
            C64::new(-1.0 / (1.0 - a) - 1.0 / (1.0 + a), 0.0),
            (1.0 - a) * (1.0 - a).ln() + (1.0 + a) * (1.0 + a).ln() - 2.0,
        )
    } else {
        let c1 = (one - w).ln();
        let c2 = (-one - w).ln();
        (
            c1 - c2,
            -1.0 / (one - w) + 1.0 / (-one - w),
            ((one - w) * c1 + (one + w) * c2).re - 2.0,
        )
    };
    q[0] = q0;
    q[1] = 2.0 + w * q0;
    for n in 1..N {
        let nf = n as f64;
        q[n + 1] = ((2.0 * nf + 1.0) * w * q[n] - nf * q[n - 1]) / (nf + 1.0);
    }
    r[0] = r0;
    r[1] = q0 + w * r0;
    for n in 1..N - 1 {
        let nf = n as f64;
        r[n + 1] = ((2.0 * nf + 1.0) * (q[n] + w * r[n]) - nf * r[n - 1]) / (nf + 1.0);
    }
    l[0] = l0;
    for n in 1..N {
        // the antiderivative (P_{n+1} - P_{n-1})/(2n+1) vanishes at +-1
        l[n] = -(q[n + 1] - q[n - 1]).re / (2.0 * n as f64 + 1.0);
    }
    (q, r, l)
}

/// Solve tau(v) = z in the panel-local variable by Newton iteration on the
/// analytic continuation of the edge parametrization (evaluated in the
/// anchored relative frame, so the search stays accurate on arbitrarily
/// deep refinement panels). Returns None if the iteration leaves the
/// trust region or fails to converge.
pub fn locate_preimage(mesh: &PanelMesh, panel: usize, z: C64) -> Option<C64> {
    let p = &mesh.panels[panel];
    let edge = &mesh.geom.edges[p.edge];
    let half = 0.5 * (p.d1 - p.d0);
    let chord = p.z1 - p.z0;
    let scale = chord.norm().max(1e-300);
    let pos = |v: C64| {
        edge.position_rel_c(p.anchor, C64::new(p.d0, 0.0) + (v + 1.0) * half) + p.corr
    };
    let vel = |v: C64| {
        edge.velocity_c(C64::new(p.anchor + p.d0, 0.0) + (v + 1.0) * half) * half
    };
    // chord-frame initial guess; the trust region must cover the far
    // nodes of parameter-neighbor panels (|v| up to ~5)
    let mut v = (2.0 * z - (p.z0 + p.z1)) / chord;
    if v.re.abs() > 8.0 || v.im.abs() > 8.0 {
        return None;
    }
    let mut converged = false;
    for _ in 0..60 {
        let f = pos(v) - z;
        let d = vel(v);
        if d.norm() == 0.0 {
            return None;
        }
        let dv = f / d;
        v -= dv;
        if v.re.abs() > 10.0 || v.im.abs() > 10.0 {
            return None;
        }
        // the update bottoms out at the rounding noise of the position
        // differences; accept there
        if dv.norm() < 1e-13 * (1.0 + v.norm()) {
            converged = true;
            break;
        }
    }
    if converged && (pos(v) - z).norm() < 1e-10 * scale {
        Some(v)
    } else {
        None
    }
}

/// Build the full per-(target, panel) context. `node_hint` marks a target
/// that is exactly quadrature node j of this panel. `on_curve` should be
/// set for targets known to lie on the source curve (mesh nodes and
/// on-surface samples); it enables the PV/FP path.
pub fn target_context(
    mesh: &PanelMesh,
    panel: usize,
    z: C64,
    node_hint: Option<usize>,
    on_curve: bool,
) -> Option<TargetContext> {
    let p = &mesh.panels[panel];
    let rule = gauss_legendre_16();
    let ustar = match node_hint {
        Some(j) => C64::new(rule.nodes[j], 0.0),
        None => locate_preimage(mesh, panel, z)?,
    };
    let on_path = node_hint.is_some()
        || (on_curve && ustar.im.abs() < ON_PATH_IM && ustar.re.abs() <= 1.0 + 1e-12);
    let ustar = if on_path { C64::new(ustar.re, 0.0) } else { ustar };

    // For on-path targets the numerators t_j - z are formed from anchored
    // relative positions, which keeps psi accurate when the target sits
    // very close to a node (and at any refinement depth).
    let edge = &mesh.geom.edges[p.edge];
    let half = 0.5 * (p.d1 - p.d0);
    let rel_star = if on_path {
        let d_star = p.d0 + (ustar.re + 1.0) * half;
        Some(edge.position_rel_c(p.anchor, C64::new(d_star, 0.0)))
    } else {
        None
    };

    let mut psi = [C64::new(0.0, 0.0); N];
    let mut ln_psi_abs = [0.0; N];
    for j in 0..N {
        let vj = C64::new(rule.nodes[j], 0.0);
        let dv = vj - ustar;
        if node_hint == Some(j) || dv.norm() < 1e-14 {
            psi[j] = mesh.dz[p.first_node + j];
        } else {
            let numer = match rel_star {
                Some(rs) => {
                    let dj = p.d0 + (rule.nodes[j] + 1.0) * half;
                    edge.position_rel_c(p.anchor, C64::new(dj, 0.0)) - rs
                }
                None => mesh.z[p.first_node + j] - z,
            };
            psi[j] = numer / dv;
        }
        ln_psi_abs[j] = psi[j].norm().ln();
    }

    let (q, r, l) = legendre_moments(ustar, on_path);
    let mut q16 = [C64::new(0.0, 0.0); N];
    q16.copy_from_slice(&q[..N]);
    Some(TargetContext {
        ustar,
        on_path,
        coincident: node_hint,
        psi,
        ln_psi_abs,
        w_log: weights_from_moments_r(&l),
        w_cau: weights_from_moments_c(&q16),
        w_hyp: weights_from_moments_c(&r),
    })
}
