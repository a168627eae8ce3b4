//! Pointwise evaluation of the Helmholtz layer kernels S, K, K^A, T and
//! their explicit splits into smooth, logarithmic, Cauchy, and
//! hypersingular channels.
//!
//! All kernels carry the factor-2 convention and multiply rho(r') dl'.
//! With z, t the complexified target/source positions, n the complexified
//! unit normals, and dt the complex line element, the split of a kernel
//! element G(r,r') dl' reads
//!
//! ```text
//! G dl' = g0 dl' + ln|r-r'| gL dl'
//!       + c_C Re{ gC dt / (i (t - z)) }
//!       + c_H Re{ gH dt / (i (t - z)^2) }
//! ```
//!
//! The factors inside Re{...} are purely geometric (normals); the complex
//! scalars c_C and c_H sit outside, which is what makes the identity hold
//! for complex-valued kernels. The channel factors are derived once from
//! H0 = J0 + i Y0 and H1 = J1 + i Y1 with the log-splits of
//! [`crate::specfun`], distributing smooth factors so that every factor is
//! analytic along the source curve (including through the diagonal). The
//! recombination identity above is the source of truth and is enforced by
//! tests; it uses the exact relations
//!
//! ```text
//! (d.n')/|d|^2 dl'          = -Re{ dt / (i (t-z)) }
//! (d.n) /|d|^2 dl'          = +Re{ n conj(n') dt / (i (t-z)) }
//! Re{ n n' / (t-z)^2 } dl'  =  Re{ n dt / (i (t-z)^2) }
//! ```
//!
//! where d = r - r'. In this arrangement S has smooth and log channels,
//! K and K^A add a Cauchy channel, and T has smooth, log, and
//! hypersingular channels (its Cauchy factor is identically zero; the
//! curvature corrections the Cauchy channel would carry are generated by
//! product integration of the hypersingular channel along the true curve).

use crate::specfun::{j0, j1, j1_over_x, y0, y0_smooth, y1, y1_regularized_over_x, EULER_GAMMA};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

/// Which layer operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    /// Single layer.
    S,
    /// Double layer.
    K,
    /// Adjoint double layer.
    KA,
    /// Normal derivative of the double layer (hypersingular).
    T,
}

/// Source-side data of a kernel evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SourcePoint {
    /// Complexified position t.
    pub z: C64,
    /// Complexified unit normal.
    pub normal: C64,
    /// Complex velocity dt/du in any fixed parametrization; |dz| is the
    /// speed in that variable.
    pub dz: C64,
}

/// Target-side data; the normal is needed for K^A and T only.
#[derive(Debug, Clone, Copy)]
pub struct TargetPoint {
    pub z: C64,
    pub normal: Option<C64>,
}

/// A source-target pair.
#[derive(Debug, Clone, Copy)]
pub struct KernelPoint {
    pub source: SourcePoint,
    pub target: TargetPoint,
}

/// The four channel factors of one kernel element.
#[derive(Debug, Clone, Copy)]
pub struct KernelSplit {
    /// Smooth channel (diagonal limit on the diagonal).
    pub g0: C64,
    /// Coefficient of ln|r - r'|, multiplies dl'.
    pub gl: C64,
    /// Geometric Cauchy-channel factor inside the real part.
    pub gc: C64,
    /// Scalar in front of the Cauchy channel.
    pub c_c: C64,
    /// Geometric hypersingular-channel factor inside the real part.
    pub gh: C64,
    /// Scalar in front of the hypersingular channel; smooth in the source
    /// point.
    pub c_h: C64,
}

impl KernelSplit {
    fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        KernelSplit { g0: z, gl: z, gc: z, c_c: z, gh: z, c_h: z }
    }
}

#[inline]
fn hankel1(order: u32, x: f64) -> C64 {
    match order {
        0 => C64::new(j0(x), y0(x)),
        1 => C64::new(j1(x), y1(x)),
        _ => unreachable!(),
    }
}

// V(x) = -(x^2/(2 pi)) J0(x) + (x/pi) J1(x) = (x^2/pi)(J1(x)/x - J0(x)/2),
// the log-channel companion of the hypersingular factor. O(x^4) at zero.
#[inline]
fn v_factor(x: f64) -> f64 {
    x * x / PI * (j1_over_x(x) - 0.5 * j0(x))
}

// W_smooth(x) = (i/4) x^2 J0 - (1/4) x^2 y0s - (i/2) x J1 + (1/2) x^2 y1r/x
//             - 1/pi,   with W_smooth(0) = -1/pi.
#[inline]
fn w_smooth(x: f64) -> C64 {
    let x2 = x * x;
    let re = -0.25 * x2 * y0_smooth(x) + 0.5 * x2 * y1_regularized_over_x(x) - 1.0 / PI;
    let im = 0.25 * x2 * j0(x) - 0.5 * x * j1(x);
    C64::new(re, im)
}

/// Full kernel value (multiplies rho dl'). Errors on coincident points;
/// the diagonal is handled by the quadrature module via the split limits.
pub fn kernel(op: OpKind, point: &KernelPoint, k: f64) -> Result<C64> {
    let d = point.target.z - point.source.z;
    let dist = d.norm();
    if dist == 0.0 {
        return Err(Error::Domain("kernel evaluated at coincident points".into()));
    }
    let x = k * dist;
    let i = C64::i();
    let ns = point.source.normal;
    Ok(match op {
        OpKind::S => 0.5 * i * hankel1(0, x),
        OpKind::K => {
            let d_dot_ns = d.re * ns.re + d.im * ns.im;
            0.5 * i * k * hankel1(1, x) * d_dot_ns / dist
        }
        OpKind::KA => {
            let nt = target_normal(point)?;
            let d_dot_nt = d.re * nt.re + d.im * nt.im;
            -0.5 * i * k * hankel1(1, x) * d_dot_nt / dist
        }
        OpKind::T => {
            let nt = target_normal(point)?;
            let d_dot_ns = d.re * ns.re + d.im * ns.im;
            let d_dot_nt = d.re * nt.re + d.im * nt.im;
            let n_dot = nt.re * ns.re + nt.im * ns.im;
            let h0 = hankel1(0, x);
            let h1 = hankel1(1, x);
            0.5 * i * k * k * h0 * d_dot_nt * d_dot_ns / (dist * dist)
                - i * k * h1 * d_dot_nt * d_dot_ns / (dist * dist * dist)
                + 0.5 * i * k * h1 * n_dot / dist
        }
    })
}

fn target_normal(point: &KernelPoint) -> Result<C64> {
    point
        .target
        .normal
        .ok_or_else(|| Error::Domain("operator requires a target normal".into()))
}

/// Channel factors at a source-target pair with r != r'.
pub fn kernel_split(op: OpKind, point: &KernelPoint, k: f64) -> Result<KernelSplit> {
    let d = point.target.z - point.source.z;
    let dist = d.norm();
    if dist == 0.0 {
        return kernel_split_diag(op, &point.source, k);
    }
    let x = k * dist;
    let i = C64::i();
    let ns = point.source.normal;
    let log_k_half = (0.5 * k).ln();
    let mut split = KernelSplit::zero();
    match op {
        OpKind::S => {
            split.gl = C64::new(-j0(x) / PI, 0.0);
            split.g0 =
                0.5 * i * j0(x) - (log_k_half * j0(x) / PI + 0.5 * y0_smooth(x)) * C64::new(1.0, 0.0);
        }
        OpKind::K => {
            let d_dot_ns = d.re * ns.re + d.im * ns.im;
            let jn = j1_over_x(x);
            split.gl = C64::new(-k * k / PI * d_dot_ns * jn, 0.0);
            split.gc = C64::new(1.0, 0.0);
            split.c_c = C64::new(-1.0 / PI, 0.0);
            split.g0 = k * k
                * d_dot_ns
                * (0.5 * i * jn
                    - C64::new(log_k_half * jn / PI + 0.5 * y1_regularized_over_x(x), 0.0));
        }
        OpKind::KA => {
            let nt = target_normal(point)?;
            let d_dot_nt = d.re * nt.re + d.im * nt.im;
            let jn = j1_over_x(x);
            split.gl = C64::new(k * k / PI * d_dot_nt * jn, 0.0);
            split.gc = nt * ns.conj();
            split.c_c = C64::new(1.0 / PI, 0.0);
            split.g0 = -k * k
                * d_dot_nt
                * (0.5 * i * jn
                    - C64::new(log_k_half * jn / PI + 0.5 * y1_regularized_over_x(x), 0.0));
        }
        OpKind::T => {
            let nt = target_normal(point)?;
            let n_dot = nt.re * ns.re + nt.im * ns.im;
            let k2 = k * k;
            split.g0 = k2
                * n_dot
                * (0.25 * i * j0(x)
                    - C64::new(
                        0.5 * log_k_half * j0(x) / PI + 0.25 * y0_smooth(x),
                        0.0,
                    ));
            // Re{ n n' / (t-z)^2 } is smooth along the curve; it feeds the
            // log channel through V.
            let tz = point.source.z - point.target.z;
            let hyper_geom = (nt * ns / (tz * tz)).re;
            split.gl =
                C64::new(-k2 / (2.0 * PI) * j0(x) * n_dot + v_factor(x) * hyper_geom, 0.0);
            split.gh = nt;
            split.c_h = w_smooth(x) + log_k_half * v_factor(x);
        }
    }
    Ok(split)
}

/// Diagonal (r' -> r) limits of the channel factors.
pub fn kernel_split_diag(op: OpKind, source: &SourcePoint, k: f64) -> Result<KernelSplit> {
    let i = C64::i();
    let log_k_half = (0.5 * k).ln();
    let mut split = KernelSplit::zero();
    match op {
        OpKind::S => {
            split.gl = C64::new(-1.0 / PI, 0.0);
            split.g0 = 0.5 * i - C64::new((log_k_half + EULER_GAMMA) / PI, 0.0);
        }
        OpKind::K => {
            split.gc = C64::new(1.0, 0.0);
            split.c_c = C64::new(-1.0 / PI, 0.0);
        }
        OpKind::KA => {
            split.gc = C64::new(1.0, 0.0);
            split.c_c = C64::new(1.0 / PI, 0.0);
        }
        OpKind::T => {
            let k2 = k * k;
            split.g0 = k2 * (0.25 * i - C64::new((0.5 * log_k_half + 0.5 * EULER_GAMMA) / PI, 0.0));
            split.gl = C64::new(-k2 / (2.0 * PI), 0.0);
            split.gh = source.normal;
            split.c_h = C64::new(-1.0 / PI, 0.0);
        }
    }
    Ok(split)
}

/// Recombine a split into the full kernel element per unit of the source
/// parametrization variable (i.e. G(r,r') |dz| for the singular channels'
/// exact complex-measure forms). Used by tests; assembly integrates the
/// channels instead.
pub fn recombine(split: &KernelSplit, point: &KernelPoint) -> C64 {
    let d = point.target.z - point.source.z;
    let dist = d.norm();
    let speed = point.source.dz.norm();
    let tz = point.source.z - point.target.z;
    let i = C64::i();
    let cauchy = (split.gc * point.source.dz / (i * tz)).re;
    let hyper = (split.gh * point.source.dz / (i * tz * tz)).re;
    (split.g0 + dist.ln() * split.gl) * speed + split.c_c * cauchy + split.c_h * hyper
}
