//! The lower-bound family for unknown truncation.
//!
//! A one-dimensional law `A = N(α, 1, (−∞, b])` removes an upper tail of mass
//! ε, with `α` chosen so that `E[A] = 0`: the truncation exactly cancels the
//! shift. Embedding `A` along a hidden unit direction `v` (standard normal on
//! `v⊥`) gives a soundness instance with `‖μ‖ = α` whose truncated mean is the
//! zero vector.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::normalized;
use crate::quadrature::{integrate, QuadOptions};
use crate::rng::{seeded, standard_normal};
use crate::special::{norm_cdf, norm_pdf, upper_tail_quantile};
use crate::truncation::{TruncatedGaussianSpec, TruncationSet};

/// Largest tail mass for which the family is built.
pub const MAX_EPS: f64 = 0.2;

/// Tail masses used by the reproducible checks.
pub const EPS_LADDER: [f64; 6] = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardInstance1D {
    pub eps: f64,
    pub alpha: f64,
    pub b: f64,
}

/// Solves the calibration in closed form.
///
/// With `q = √2·erf⁻¹(1 − 2ε)` the (1 − ε)-quantile of N(0, 1), the cutoff is
/// `b = α + q` and `E[A] = α − φ(q)/(1 − ε)`, so `α = φ(q)/(1 − ε)`.
pub fn calibrate_hard_instance(eps: f64) -> Result<HardInstance1D> {
    if !(eps > 0.0 && eps <= MAX_EPS) {
        return Err(Error::InvalidParameter("hard instance needs 0 < eps <= 0.2"));
    }
    let q = upper_tail_quantile(eps);
    let alpha = norm_pdf(q) / (1.0 - eps);
    Ok(HardInstance1D { eps, alpha, b: alpha + q })
}

/// The family member whose shift is `alpha`: bisection on ε, since the
/// calibrated α increases with ε. Fails unless `alpha` is attainable with
/// ε ≤ 0.2.
pub fn hard_instance_for_alpha(alpha: f64) -> Result<HardInstance1D> {
    let top = calibrate_hard_instance(MAX_EPS)?;
    if !(alpha > 0.0 && alpha <= top.alpha) {
        return Err(Error::InvalidParameter("alpha is outside the hard-instance family"));
    }
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, MAX_EPS);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if calibrate_hard_instance(mid)?.alpha < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    calibrate_hard_instance(hi)
}

impl HardInstance1D {
    /// N(α, 1, (−∞, b]) mass; equals `1 − ε` by construction.
    pub fn mass(&self) -> f64 {
        norm_cdf(self.b - self.alpha)
    }

    /// `E[A] = α − φ(b − α)/Φ(b − α)`.
    pub fn mean(&self) -> f64 {
        let t = self.b - self.alpha;
        self.alpha - norm_pdf(t) / norm_cdf(t)
    }

    /// Realized `α / (ε·√ln(1/ε))`.
    pub fn alpha_ratio(&self) -> f64 {
        self.alpha / (self.eps * libm::sqrt(libm::log(1.0 / self.eps)))
    }

    pub fn density(&self, x: f64) -> f64 {
        if x > self.b {
            0.0
        } else {
            norm_pdf(x - self.alpha) / (1.0 - self.eps)
        }
    }

    /// CDF of `A`, normalized by the exact mass `Φ(b − α)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x >= self.b {
            1.0
        } else {
            norm_cdf(x - self.alpha) / norm_cdf(self.b - self.alpha)
        }
    }
}

/// χ²(N(α, 1, (−∞, b]), N(0, 1)) with truncated mass ε:
/// `Φ(b − 2α)·exp(α²)/(1 − ε)² − 1`.
pub fn chi_square_tail_truncated(alpha: f64, eps: f64, b: f64) -> f64 {
    norm_cdf(b - 2.0 * alpha) * libm::exp(alpha * alpha) / ((1.0 - eps) * (1.0 - eps)) - 1.0
}

pub fn chi_square_closed_form(inst: &HardInstance1D) -> f64 {
    chi_square_tail_truncated(inst.alpha, inst.eps, inst.b)
}

/// χ² by adaptive quadrature of `∫_{−∞}^{b} p_A(x)²/φ(x) dx − 1`.
pub fn chi_square_quadrature(inst: &HardInstance1D, tol: f64) -> Result<f64> {
    let norm = 1.0 - inst.eps;
    let alpha = inst.alpha;
    let integrand = |x: f64| {
        // p_A(x)²/φ(x) = φ(x − α)²/φ(x)/(1 − ε)², combined in the exponent.
        let expo = -(x - alpha) * (x - alpha) + 0.5 * x * x;
        crate::special::FRAC_1_SQRT_2PI * libm::exp(expo) / (norm * norm)
    };
    let opts = QuadOptions { abs_tol: tol * 1e-2, rel_tol: tol * 1e-2, max_intervals: 4000 };
    let r = integrate(integrand, f64::NEG_INFINITY, inst.b, 2.0 * alpha, &opts)?;
    Ok(r.value - 1.0)
}

/// `d / (8·χ²)`: below this many samples no tester separates N(0, I_d) from
/// the embedded family with probability 2/3. Infinite when χ² is zero.
pub fn sample_complexity_floor(inst: &HardInstance1D, d: usize) -> f64 {
    floor_from_chi_square(chi_square_closed_form(inst), d)
}

pub fn floor_from_chi_square(chi2: f64, d: usize) -> f64 {
    if chi2 <= 0.0 {
        return f64::INFINITY;
    }
    d as f64 / (8.0 * chi2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedHardInstance {
    pub one_d: HardInstance1D,
    pub direction: Vec<f64>,
}

/// Uniform direction on the unit sphere, from a normalized Gaussian vector.
pub fn random_direction<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        if let Some(v) = normalized(&g) {
            return v;
        }
    }
}

pub fn embed(inst: &HardInstance1D, d: usize, seed: u64) -> Result<EmbeddedHardInstance> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive"));
    }
    let mut rng = seeded(seed);
    Ok(EmbeddedHardInstance { one_d: *inst, direction: random_direction(&mut rng, d) })
}

impl EmbeddedHardInstance {
    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// Pre-truncation mean `α·v`.
    pub fn mean(&self) -> Vec<f64> {
        self.direction.iter().map(|v| v * self.one_d.alpha).collect()
    }

    /// `S_v = {x : ⟨v, x⟩ ≤ b}`.
    pub fn set(&self) -> Result<TruncationSet> {
        TruncationSet::half_space_tail(self.direction.clone(), self.one_d.b)
    }

    pub fn spec(&self) -> Result<TruncatedGaussianSpec> {
        TruncatedGaussianSpec::new(self.mean(), self.set()?)
    }

    pub fn record(&self) -> HardInstanceRecord {
        HardInstanceRecord {
            eps: self.one_d.eps,
            alpha: self.one_d.alpha,
            b: self.one_d.b,
            direction: self.direction.clone(),
            dim: self.dim(),
        }
    }
}

/// Replay form `{eps, alpha, b, direction, dim}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceRecord {
    pub eps: f64,
    pub alpha: f64,
    pub b: f64,
    pub direction: Vec<f64>,
    pub dim: usize,
}

impl TryFrom<&HardInstanceRecord> for EmbeddedHardInstance {
    type Error = Error;

    fn try_from(r: &HardInstanceRecord) -> Result<Self> {
        if r.direction.len() != r.dim {
            return Err(Error::DimensionMismatch { expected: r.dim, found: r.direction.len() });
        }
        let n = crate::linalg::norm(&r.direction);
        let direction = if (n - 1.0).abs() <= 1e-12 {
            r.direction.clone()
        } else {
            normalized(&r.direction).ok_or(Error::InvalidParameter("direction must be non-zero"))?
        };
        Ok(Self { one_d: HardInstance1D { eps: r.eps, alpha: r.alpha, b: r.b }, direction })
    }
}
