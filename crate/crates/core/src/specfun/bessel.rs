//! Bessel functions J0, J1, Y0, Y1 for real arguments, plus the smooth
//! (log-free) components used by the kernel splits.
//!
//! The domain is divided at x = 5. Below, rational approximations in x^2
//! are used; above, the Hankel asymptotic form with fitted rational
//! functions. Peak error is a few units of 1e-16 in absolute terms,
//! relative where the function is O(1) or larger.
//!
//! The Y functions are fitted as `Y_n(x) - (2/pi) ln(x) J_n(x)` (minus the
//! 1/x pole for n = 1), which is exactly what the kernel splits need: the
//! smooth parts below come straight out of the fits without cancellation.

use std::f64::consts::{FRAC_PI_4, LN_2, PI};

const SQRT_FRAC_2_PI: f64 = 0.7978845608028654;
/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

const TWO_OVER_PI: f64 = 2.0 / PI;

fn polevl(x: f64, coeffs: &[f64]) -> f64 {
    let mut r = coeffs[0];
    for c in &coeffs[1..] {
        r = r * x + c;
    }
    r
}

// Same as polevl with an implicit leading coefficient of 1.
fn p1evl(x: f64, coeffs: &[f64]) -> f64 {
    let mut r = x + coeffs[0];
    for c in &coeffs[1..] {
        r = r * x + c;
    }
    r
}

const J0_DR1: f64 = 5.783185962946784;
const J0_DR2: f64 = 30.471262343662087;

static J0_RP: [f64; 4] = [
    -4.794432209782018e9,
    1.9561749194655657e12,
    -2.4924834436096772e14,
    9.708622510473064e15,
];
static J0_RQ: [f64; 8] = [
    4.99563147152651e2,
    1.737854016763747e5,
    4.844096583399621e7,
    1.1185553704535683e10,
    2.112775201154892e12,
    3.1051822985742256e14,
    3.1812195594320496e16,
    1.7108629408104315e18,
];
static J0_PP: [f64; 7] = [
    7.969367292973471e-4,
    8.283523921074408e-2,
    1.239533716464143,
    5.447250030587687,
    8.74716500199817,
    5.303240382353949,
    1.0,
];
static J0_PQ: [f64; 7] = [
    9.244088105588637e-4,
    8.562884743544745e-2,
    1.2535274390105895,
    5.470977403304171,
    8.761908832370695,
    5.306052882353947,
    1.0,
];
static J0_QP: [f64; 8] = [
    -1.1366383889846916e-2,
    -1.2825271867050931,
    -1.9553954425773597e1,
    -9.320601521237683e1,
    -1.7768116798048806e2,
    -1.4707750515495118e2,
    -5.141053267665993e1,
    -6.050143506007285,
];
static J0_QQ: [f64; 7] = [
    6.43178256118178e1,
    8.564300259769806e2,
    3.8824018360540163e3,
    7.240467741956525e3,
    5.930727011873169e3,
    2.0620933166032783e3,
    2.420057402402914e2,
];
static Y0_YP: [f64; 8] = [
    1.5592436785523574e4,
    -1.466392959039716e7,
    5.435264770518765e9,
    -9.821360657179115e11,
    8.75906394395367e13,
    -3.466283033847297e15,
    4.4273326857256984e16,
    -1.8495080043698668e16,
];
static Y0_YQ: [f64; 7] = [
    1.0412835366425984e3,
    6.26107330137135e5,
    2.6891963339381415e8,
    8.64002487103935e10,
    2.0297961275010555e13,
    3.1715775284297505e15,
    2.5059625617265306e17,
];

const J1_Z1: f64 = 1.4681970642123893e1;
const J1_Z2: f64 = 4.92184563216946e1;

static J1_RP: [f64; 4] = [
    -8.999712257055594e8,
    4.5222829799819403e11,
    -7.274942452218183e13,
    3.682957328638529e15,
];
static J1_RQ: [f64; 8] = [
    6.208364781180543e2,
    2.5698725675774884e5,
    8.351467914319493e7,
    2.215115954797925e10,
    4.749141220799914e12,
    7.843696078762359e14,
    8.952223361846274e16,
    5.322786203326801e18,
];
static J1_PP: [f64; 7] = [
    7.621256162081731e-4,
    7.313970569409176e-2,
    1.1271960812968493,
    5.112079511468076,
    8.424045901417724,
    5.214515986823615,
    1.0,
];
static J1_PQ: [f64; 7] = [
    5.713231280725487e-4,
    6.884559087544954e-2,
    1.105142326340617,
    5.073863861286015,
    8.399855543276042,
    5.209828486823619,
    1.0,
];
static J1_QP: [f64; 8] = [
    5.108625947501766e-2,
    4.982138729512334,
    7.582382841325453e1,
    3.667796093601508e2,
    7.108563049989261e2,
    5.974896124006136e2,
    2.1168875710057213e2,
    2.5207020585802372e1,
];
static J1_QQ: [f64; 7] = [
    7.423732770356752e1,
    1.0564488603826283e3,
    4.986410583376536e3,
    9.562318924047562e3,
    7.997041604473507e3,
    2.8261927851763908e3,
    3.360936078106983e2,
];
static Y1_YP: [f64; 6] = [
    1.2632047479017804e9,
    -6.473558763791603e11,
    1.1450951154182373e14,
    -8.127702555013251e15,
    2.024394757135949e17,
    -7.788771962659501e17,
];
static Y1_YQ: [f64; 8] = [
    5.943015923461282e2,
    2.3556409294306856e5,
    7.348119444597217e7,
    1.8760131610870617e10,
    3.8823127749623857e12,
    6.205577271469538e14,
    6.871410873553005e16,
    3.9727060811656064e18,
];

/// J0(x).
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 5.0 {
        let z = x * x;
        if x < 1e-5 {
            return 1.0 - z / 4.0;
        }
        (z - J0_DR1) * (z - J0_DR2) * polevl(z, &J0_RP) / p1evl(z, &J0_RQ)
    } else {
        let w = 5.0 / x;
        let z = w * w;
        let p = polevl(z, &J0_PP) / polevl(z, &J0_PQ);
        let q = polevl(z, &J0_QP) / p1evl(z, &J0_QQ);
        let xn = x - FRAC_PI_4;
        (p * xn.cos() - w * q * xn.sin()) * SQRT_FRAC_2_PI / x.sqrt()
    }
}

/// J1(x).
pub fn j1(x: f64) -> f64 {
    if x < 0.0 {
        return -j1(-x);
    }
    if x <= 5.0 {
        x * j1_over_x_small(x * x)
    } else {
        let w = 5.0 / x;
        let z = w * w;
        let p = polevl(z, &J1_PP) / polevl(z, &J1_PQ);
        let q = polevl(z, &J1_QP) / p1evl(z, &J1_QQ);
        let xn = x - 0.75 * PI;
        (p * xn.cos() - w * q * xn.sin()) * SQRT_FRAC_2_PI / x.sqrt()
    }
}

#[inline]
fn j1_over_x_small(z: f64) -> f64 {
    (z - J1_Z1) * (z - J1_Z2) * polevl(z, &J1_RP) / p1evl(z, &J1_RQ)
}

/// J1(x)/x, finite through x = 0 (value 1/2).
pub fn j1_over_x(x: f64) -> f64 {
    let x = x.abs();
    if x <= 5.0 {
        j1_over_x_small(x * x)
    } else {
        j1(x) / x
    }
}

/// Y0(x) for x > 0.
pub fn y0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 5.0 {
        y0_smooth_small(x) - TWO_OVER_PI * LN_2 * j0(x) + TWO_OVER_PI * x.ln() * j0(x)
    } else {
        let w = 5.0 / x;
        let z = w * w;
        let p = polevl(z, &J0_PP) / polevl(z, &J0_PQ);
        let q = polevl(z, &J0_QP) / p1evl(z, &J0_QQ);
        let xn = x - FRAC_PI_4;
        (p * xn.sin() + w * q * xn.cos()) * SQRT_FRAC_2_PI / x.sqrt()
    }
}

/// Y1(x) for x > 0.
pub fn y1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 5.0 {
        let z = x * x;
        x * (polevl(z, &Y1_YP) / p1evl(z, &Y1_YQ)) + TWO_OVER_PI * (j1(x) * x.ln() - 1.0 / x)
    } else {
        let w = 5.0 / x;
        let z = w * w;
        let p = polevl(z, &J1_PP) / polevl(z, &J1_PQ);
        let q = polevl(z, &J1_QP) / p1evl(z, &J1_QQ);
        let xn = x - 0.75 * PI;
        (p * xn.sin() + w * q * xn.cos()) * SQRT_FRAC_2_PI / x.sqrt()
    }
}

// Y0(x) - (2/pi) ln(x/2) J0(x) in the fitted region, no cancellation.
#[inline]
fn y0_smooth_small(x: f64) -> f64 {
    let z = x * x;
    polevl(z, &Y0_YP) / p1evl(z, &Y0_YQ) + TWO_OVER_PI * LN_2 * j0(x)
}

/// Y0(x) - (2/pi) ln(x/2) J0(x); analytic through x = 0 with value
/// 2*gamma/pi.
pub fn y0_smooth(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= 5.0 {
        if x == 0.0 {
            return TWO_OVER_PI * EULER_GAMMA;
        }
        y0_smooth_small(x)
    } else {
        y0(x) - TWO_OVER_PI * (x / 2.0).ln() * j0(x)
    }
}

/// Y1(x) - (2/pi) ln(x/2) J1(x) + 2/(pi x); odd analytic through x = 0.
pub fn y1_regularized(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= 5.0 {
        let z = x * x;
        x * (polevl(z, &Y1_YP) / p1evl(z, &Y1_YQ)) + TWO_OVER_PI * LN_2 * j1(x)
    } else {
        y1(x) - TWO_OVER_PI * (x / 2.0).ln() * j1(x) + TWO_OVER_PI / x
    }
}

/// (Y1(x) - (2/pi) ln(x/2) J1(x) + 2/(pi x)) / x, even analytic, finite at 0.
pub fn y1_regularized_over_x(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= 5.0 {
        let z = x * x;
        polevl(z, &Y1_YP) / p1evl(z, &Y1_YQ) + TWO_OVER_PI * LN_2 * j1_over_x(x)
    } else {
        y1_regularized(x) / x
    }
}
