//! Normal distribution primitives: density, CDF, quantile, `erf⁻¹`, and the
//! inverse Mills ratio used by every one-sided truncation formula.
//!
//! `erf`/`erfc` come from `libm`. The inverses start from a rational
//! approximation and are polished with Halley steps against `erfc`, which keeps
//! full relative precision deep into the tails.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1/√(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `ln √(2π)`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density φ(x).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF Φ(x), accurate in relative terms for the lower tail.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x) without cancellation.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, finite for arbitrarily negative `x`.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        libm::log(norm_cdf(x))
    } else {
        -0.5 * x * x - LN_SQRT_2PI - libm::log(-x) + libm::log(mills_series(x))
    }
}

/// Inverse Mills ratio φ(t)/Φ(t).
///
/// For `X ~ N(0,1)` conditioned on `X ≤ t` the mean is `-inverse_mills(t)`
/// and the variance is `1 − t·λ − λ²` with `λ = inverse_mills(t)`.
pub fn inverse_mills(t: f64) -> f64 {
    if t > -30.0 {
        norm_pdf(t) / norm_cdf(t)
    } else {
        -t / mills_series(t)
    }
}

// Φ(x)·(−x)/φ(x) = 1 − 1/x² + 3/x⁴ − 15/x⁶ + … for x ≪ 0.
fn mills_series(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    1.0 - z * (1.0 - z * (3.0 - z * (15.0 - z * (105.0 - z * (945.0 - 10395.0 * z)))))
}

// Rational approximation for the normal quantile (relative error ~1e-9),
// used only as a starting point for refinement.
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn quantile_guess(p: f64) -> f64 {
    const P_LOW: f64 = 0.024_25;
    if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        -quantile_guess(1.0 - p)
    }
}

/// Standard normal quantile Φ⁻¹(p).
///
/// For upper-tail probabilities close to one, prefer [`norm_quantile_upper`],
/// which takes the (exactly representable) tail mass instead of `p`.
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -lower_quantile(1.0 - p);
    }
    lower_quantile(p)
}

/// `x` with `1 − Φ(x) = q`.
pub fn norm_quantile_upper(q: f64) -> f64 {
    if q.is_nan() || !(0.0..=1.0).contains(&q) {
        return f64::NAN;
    }
    if q == 0.0 {
        return f64::INFINITY;
    }
    if q == 1.0 {
        return f64::NEG_INFINITY;
    }
    if q > 0.5 {
        return lower_quantile(1.0 - q);
    }
    -lower_quantile(q)
}

// p in (0, 0.5]; refinement works on the lower tail where Φ keeps precision.
fn lower_quantile(p: f64) -> f64 {
    let mut x = quantile_guess(p);
    for _ in 0..3 {
        let e = norm_cdf(x) - p;
        let u = e * SQRT_2PI * libm::exp(0.5 * x * x);
        let step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if libm::fabs(step) <= 1e-16 * libm::fabs(x) {
            break;
        }
    }
    x
}

/// Inverse complementary error function, `erfc(erfc_inv(r)) = r` for `r ∈ (0, 2)`.
pub fn erfc_inv(r: f64) -> f64 {
    if r.is_nan() || !(0.0..=2.0).contains(&r) {
        return f64::NAN;
    }
    if r == 0.0 {
        return f64::INFINITY;
    }
    if r == 2.0 {
        return f64::NEG_INFINITY;
    }
    if r > 1.0 {
        return -erfc_inv(2.0 - r);
    }
    // erfc(x) = 2(1 − Φ(x√2))
    let mut x = norm_quantile_upper(0.5 * r) * FRAC_1_SQRT_2;
    for _ in 0..2 {
        let g = libm::erfc(x) - r;
        let dg = -2.0 / libm::sqrt(PI) * libm::exp(-x * x);
        let u = g / dg;
        x -= u / (1.0 + x * u);
    }
    x
}

/// Inverse error function on `(-1, 1)`.
pub fn erf_inv(y: f64) -> f64 {
    if y.is_nan() || !(-1.0..=1.0).contains(&y) {
        return f64::NAN;
    }
    if y < 0.0 {
        return -erf_inv(-y);
    }
    if y >= 0.5 {
        return erfc_inv(1.0 - y);
    }
    if y == 0.0 {
        return 0.0;
    }
    let mut x = norm_quantile(0.5 + 0.5 * y) * FRAC_1_SQRT_2;
    for _ in 0..2 {
        let f = libm::erf(x) - y;
        let df = 2.0 / libm::sqrt(PI) * libm::exp(-x * x);
        let u = f / df;
        x -= u / (1.0 + x * u);
    }
    x
}

/// `√2 · erf⁻¹(1 − 2ε)`, the (1 − ε)-quantile of N(0, 1), computed from ε
/// directly so small tail masses keep their precision.
pub fn upper_tail_quantile(eps: f64) -> f64 {
    norm_quantile_upper(eps)
}
