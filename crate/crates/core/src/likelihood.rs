//! Population negative log-likelihood of a unit-covariance truncated Gaussian,
//!
//! ```text
//! ℓ̄(v) = E_{x∼N(μ,I,S)}[½xᵀx − vᵀx] + log ∫_S exp(−½zᵀz + vᵀz) dz,
//! ∇ℓ̄(v) = −E_{N(μ,I,S)}[x] + E_{N(v,I,S)}[z],
//! ```
//!
//! evaluated three ways: closed form (full space and half-spaces, any d),
//! nested quadrature (same kinds, d ≤ 3), and Monte-Carlo (any set, any d).
//! The strong-convexity floor and the truncated-mean gap used by the
//! known-truncation tester live here as well.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{complete_basis, dot, norm, norm_sq, unit_vector, SymMatrix};
use crate::quadrature::{integrate_box, Axis, QuadOptions};
use crate::rng::{derive_seed, seeded};
use crate::special::{inverse_mills, ln_norm_cdf, LN_SQRT_2PI};
use crate::truncation::{
    Estimate, SetKind, TruncationSet, VectorEstimate, DEFAULT_MC_BUDGET,
};

/// Highest dimension served by the nested quadrature route.
pub const MAX_QUADRATURE_DIM: usize = 3;

/// Default for the unnamed universal constant in the strong-convexity floor.
pub const DEFAULT_CONVEXITY_CONSTANT: f64 = 1.0;

/// Budget cap for Monte-Carlo μ′_S.
pub const MAX_NULL_MEAN_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Analytic,
    Quadrature { tol: f64 },
    MonteCarlo { budget: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    set: TruncationSet,
    data_mean: Vec<f64>,
    evaluation: Evaluation,
}

impl LikelihoodContext {
    pub fn new(set: TruncationSet, data_mean: Vec<f64>, evaluation: Evaluation) -> Result<Self> {
        check_dim(set.dim(), data_mean.len())?;
        match evaluation {
            Evaluation::Analytic if !set.has_closed_form() => {
                return Err(Error::Unsupported("closed-form likelihood needs a full or half space"))
            }
            Evaluation::Quadrature { tol } => {
                if !set.has_closed_form() {
                    return Err(Error::Unsupported("quadrature likelihood needs a full or half space"));
                }
                if set.dim() > MAX_QUADRATURE_DIM {
                    return Err(Error::Unsupported("quadrature mode is limited to d <= 3"));
                }
                if !(tol > 0.0) {
                    return Err(Error::InvalidParameter("quadrature tolerance must be positive"));
                }
            }
            Evaluation::MonteCarlo { budget, .. } if budget < 2 => {
                return Err(Error::InvalidParameter("Monte-Carlo budget must be at least 2"))
            }
            _ => {}
        }
        Ok(Self { set, data_mean, evaluation })
    }

    pub fn dim(&self) -> usize {
        self.data_mean.len()
    }

    pub fn set(&self) -> &TruncationSet {
        &self.set
    }

    pub fn data_mean(&self) -> &[f64] {
        &self.data_mean
    }

    pub fn evaluation(&self) -> Evaluation {
        self.evaluation
    }

    /// N(μ, I, S) of the data-generating law.
    pub fn mass(&self) -> Result<f64> {
        if let Some(m) = self.set.analytic_mass(&self.data_mean) {
            return Ok(m);
        }
        let (budget, seed) = self.mc_params();
        let mut rng = seeded(derive_seed(seed, 0));
        Ok(self.set.mass(&self.data_mean, &mut rng, budget)?.value)
    }

    fn mc_params(&self) -> (usize, u64) {
        match self.evaluation {
            Evaluation::MonteCarlo { budget, seed } => (budget, seed),
            _ => (DEFAULT_MC_BUDGET, 0),
        }
    }
}

pub fn neg_log_likelihood(ctx: &LikelihoodContext, v: &[f64]) -> Result<Estimate> {
    check_dim(ctx.dim(), v.len())?;
    match ctx.evaluation {
        Evaluation::Analytic => Ok(Estimate::exact(analytic_nll(ctx, v))),
        Evaluation::Quadrature { tol } => Ok(Estimate::exact(quadrature_nll(ctx, v, tol)?)),
        Evaluation::MonteCarlo { budget, seed } => monte_carlo_nll(ctx, v, budget, seed),
    }
}

pub fn grad_neg_log_likelihood(ctx: &LikelihoodContext, v: &[f64]) -> Result<VectorEstimate> {
    check_dim(ctx.dim(), v.len())?;
    match ctx.evaluation {
        Evaluation::Analytic => {
            let data = ctx.set.analytic_truncated_mean(&ctx.data_mean).expect("closed form");
            let model = ctx.set.analytic_truncated_mean(v).expect("closed form");
            Ok(VectorEstimate::exact(model.iter().zip(&data).map(|(m, d)| m - d).collect()))
        }
        Evaluation::Quadrature { tol } => {
            let frame = Frame::new(&ctx.set);
            let data = frame.gaussian_mean(&ctx.data_mean, tol)?;
            let model = frame.tilted_mean(v, tol)?;
            Ok(VectorEstimate::exact(model.iter().zip(&data).map(|(m, d)| m - d).collect()))
        }
        Evaluation::MonteCarlo { budget, seed } => {
            let mut rng = seeded(derive_seed(seed, 1));
            let data = ctx.set.truncated_mean(&ctx.data_mean, budget, &mut rng)?;
            let mut rng = seeded(derive_seed(seed, 2));
            let model = ctx.set.truncated_mean(v, budget, &mut rng)?;
            let value = model.value.iter().zip(&data.value).map(|(m, d)| m - d).collect();
            let stderr = model
                .stderr
                .iter()
                .zip(&data.stderr)
                .map(|(a, b)| libm::sqrt(a * a + b * b))
                .collect();
            Ok(VectorEstimate { value, stderr, samples: model.samples + data.samples })
        }
    }
}

fn analytic_nll(ctx: &LikelihoodContext, v: &[f64]) -> f64 {
    let d = ctx.dim() as f64;
    let mu = &ctx.data_mean;
    let mu_s = ctx.set.analytic_truncated_mean(mu).expect("closed form");
    let cov = ctx.set.analytic_truncated_covariance(mu).expect("closed form");
    let expected_sq = 0.5 * (cov.trace() + norm_sq(&mu_s));
    let log_partition = d * LN_SQRT_2PI
        + 0.5 * norm_sq(v)
        + match ctx.set.kind() {
            SetKind::HalfSpaceTail { direction, cutoff } => ln_norm_cdf(cutoff - dot(direction, v)),
            _ => 0.0,
        };
    expected_sq - dot(v, &mu_s) + log_partition
}

fn monte_carlo_nll(ctx: &LikelihoodContext, v: &[f64], budget: usize, seed: u64) -> Result<Estimate> {
    let d = ctx.dim();
    let mut rng = seeded(derive_seed(seed, 3));
    let batch = crate::sampling::sample_truncated(
        &crate::truncation::TruncatedGaussianSpec::new(ctx.data_mean.clone(), ctx.set.clone())?,
        budget,
        crate::rng::derive_seed(seed, 4),
        crate::truncation::DEFAULT_MAX_REJECTION_FACTOR,
    )?;
    let terms: Vec<f64> = batch.rows().map(|x| 0.5 * norm_sq(x) - dot(v, x)).collect();
    let n = terms.len() as f64;
    let mean = crate::statistics::pairwise_sum(&terms) / n;
    let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
    let mass = ctx.set.mass(v, &mut rng, budget)?;
    // log ∫_S exp(−½|z|² + vᵀz) dz = (d/2)·ln 2π + ½|v|² + ln N(v, I, S)
    let log_partition = d as f64 * LN_SQRT_2PI + 0.5 * norm_sq(v) + libm::log(mass.value);
    let se_log = if mass.value > 0.0 { mass.stderr / mass.value } else { f64::INFINITY };
    Ok(Estimate {
        value: mean + log_partition,
        stderr: libm::sqrt(var / n + se_log * se_log),
        samples: budget,
    })
}

/// Rotated integration frame: the first axis runs along the half-space
/// normal (bounded above by the cutoff), the others span its complement.
struct Frame {
    basis: Vec<Vec<f64>>,
    upper: f64,
}

impl Frame {
    fn new(set: &TruncationSet) -> Self {
        match set.kind() {
            SetKind::HalfSpaceTail { direction, cutoff } => {
                Self { basis: complete_basis(direction), upper: *cutoff }
            }
            _ => Self {
                basis: (0..set.dim()).map(|k| unit_vector(set.dim(), k)).collect(),
                upper: f64::INFINITY,
            },
        }
    }

    fn axes(&self, center: &[f64]) -> Vec<Axis> {
        self.basis
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let c = dot(q, center);
                if k == 0 {
                    Axis { lo: f64::NEG_INFINITY, hi: self.upper, center: c }
                } else {
                    Axis::real_line(c)
                }
            })
            .collect()
    }

    fn to_point(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (wk, q) in w.iter().zip(&self.basis) {
            for (o, qi) in out.iter_mut().zip(q) {
                *o += wk * qi;
            }
        }
    }

    /// `∫_S g(z)·exp(log_weight(z)) dz` over the frame.
    fn integrate<G, W>(&self, center: &[f64], tol: f64, g: G, log_weight: W) -> Result<f64>
    where
        G: Fn(&[f64]) -> f64,
        W: Fn(&[f64]) -> f64,
    {
        let d = self.basis.len();
        let mut z = vec![0.0; d];
        let opts = QuadOptions { abs_tol: tol * 1e-3, rel_tol: tol, max_intervals: 4000 };
        let r = integrate_box(
            |w| {
                self.to_point(w, &mut z);
                g(&z) * libm::exp(log_weight(&z))
            },
            &self.axes(center),
            &opts,
        )?;
        Ok(r.value)
    }

    /// E[x] under N(μ, I, S), integrating the normal density `φ_d(x − μ)`.
    fn gaussian_mean(&self, mu: &[f64], tol: f64) -> Result<Vec<f64>> {
        let d = mu.len();
        let lw = |x: &[f64]| {
            -0.5 * x.iter().zip(mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>()
                - d as f64 * LN_SQRT_2PI
        };
        let mass = self.integrate(mu, tol, |_| 1.0, lw)?;
        (0..d).map(|i| Ok(self.integrate(mu, tol, |x| x[i], lw)? / mass)).collect()
    }

    /// E[z] under the exponentially tilted weight `exp(−½zᵀz + vᵀz)` on S.
    fn tilted_mean(&self, v: &[f64], tol: f64) -> Result<Vec<f64>> {
        let d = v.len();
        let lw = |z: &[f64]| -0.5 * norm_sq(z) + dot(v, z);
        let partition = self.integrate(v, tol, |_| 1.0, lw)?;
        (0..d).map(|i| Ok(self.integrate(v, tol, |z| z[i], lw)? / partition)).collect()
    }
}

fn quadrature_nll(ctx: &LikelihoodContext, v: &[f64], tol: f64) -> Result<f64> {
    let frame = Frame::new(&ctx.set);
    let mu = &ctx.data_mean;
    let d = mu.len();
    let lw = |x: &[f64]| {
        -0.5 * x.iter().zip(mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>()
            - d as f64 * LN_SQRT_2PI
    };
    let mass = frame.integrate(mu, tol, |_| 1.0, lw)?;
    let expected = frame.integrate(mu, tol, |x| 0.5 * norm_sq(x) - dot(v, x), lw)? / mass;
    let partition = frame.integrate(v, tol, |_| 1.0, |z| -0.5 * norm_sq(z) + dot(v, z))?;
    Ok(expected + libm::log(partition))
}

/// Hessian of ℓ̄ by central second differences with step `h`.
pub fn numeric_hessian(ctx: &LikelihoodContext, v: &[f64], h: f64) -> Result<SymMatrix> {
    check_dim(ctx.dim(), v.len())?;
    let d = v.len();
    let f = |p: &[f64]| neg_log_likelihood(ctx, p).map(|e| e.value);
    let center = f(v)?;
    let mut hess = SymMatrix::zeros(d);
    let mut p = v.to_vec();
    for i in 0..d {
        p[i] = v[i] + h;
        let up = f(&p)?;
        p[i] = v[i] - h;
        let down = f(&p)?;
        p[i] = v[i];
        hess.set(i, i, (up - 2.0 * center + down) / (h * h));
        for j in (i + 1)..d {
            let mut corner = |si: f64, sj: f64| {
                p[i] = v[i] + si * h;
                p[j] = v[j] + sj * h;
                let r = f(&p);
                p[i] = v[i];
                p[j] = v[j];
                r
            };
            let val = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * h * h);
            hess.set(i, j, val);
        }
    }
    Ok(hess)
}

/// μ′_S = E_{x∼N(0,I,S)}[x]: exact for closed-form sets, otherwise
/// Monte-Carlo with a budget sized so every coordinate's standard error is at
/// most `accuracy`.
pub fn null_truncated_mean(set: &TruncationSet, accuracy: f64, seed: u64) -> Result<VectorEstimate> {
    let zero = vec![0.0; set.dim()];
    if let Some(m) = set.analytic_truncated_mean(&zero) {
        return Ok(VectorEstimate::exact(m));
    }
    if !(accuracy > 0.0) {
        return Err(Error::InvalidParameter("accuracy must be positive"));
    }
    const PILOT: usize = 10_000;
    let mut rng = seeded(derive_seed(seed, 0));
    let pilot = set.truncated_mean(&zero, PILOT, &mut rng)?;
    let sd = pilot.max_stderr() * libm::sqrt(PILOT as f64);
    // 10% headroom over the pilot's spread estimate.
    let needed = libm::ceil(1.1 * (sd / accuracy) * (sd / accuracy)) as usize;
    if needed > MAX_NULL_MEAN_BUDGET {
        return Err(Error::AccuracyInfeasible {
            requested: accuracy,
            achievable: sd / libm::sqrt(MAX_NULL_MEAN_BUDGET as f64),
        });
    }
    let mut rng = seeded(derive_seed(seed, 1));
    let est = set.truncated_mean(&zero, needed.max(PILOT), &mut rng)?;
    if est.max_stderr() > accuracy {
        return Err(Error::AccuracyInfeasible { requested: accuracy, achievable: est.max_stderr() });
    }
    Ok(est)
}

/// `2⁻¹³·(β/C)⁴·min{¼, 1/(16‖μ‖² + 1)}` for a set of mass at least β under N(μ, I).
pub fn strong_convexity_bound(beta: f64, mu_norm: f64, constant_c: f64) -> f64 {
    let r = beta / constant_c;
    let tail = (1.0 / (16.0 * mu_norm * mu_norm + 1.0)).min(0.25);
    r * r * r * r * tail / 8192.0
}

/// λ₀ for the context's own data law, with β its exact or estimated mass.
pub fn strong_convexity_floor(ctx: &LikelihoodContext, constant_c: f64) -> Result<f64> {
    if !(constant_c > 0.0) {
        return Err(Error::InvalidParameter("convexity constant must be positive"));
    }
    Ok(strong_convexity_bound(ctx.mass()?, norm(&ctx.data_mean), constant_c))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    /// `‖μ′_S − μ″_S‖²`
    pub gap: f64,
    /// `(λ₀/2)²·‖μ″‖²`
    pub floor: f64,
    pub lambda0: f64,
}

impl GapCheck {
    pub fn holds(&self) -> bool {
        self.gap >= self.floor
    }
}

/// Compares the truncated-mean gap between N(0, I, S) and N(μ″, I, S) with the
/// floor implied by λ₀-strong convexity and Cauchy–Schwarz. The floor uses
/// the `‖μ″‖`-dependent λ₀ with mass bound `1 − beta` and `C = 1`.
pub fn mean_gap_lower_bound_check(
    set: &TruncationSet,
    mu2: &[f64],
    beta: f64,
    seed: u64,
) -> Result<GapCheck> {
    check_dim(set.dim(), mu2.len())?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidParameter("beta must lie in [0, 1)"));
    }
    let mut rng = seeded(derive_seed(seed, 7));
    let mass = set.mass(mu2, &mut rng, DEFAULT_MC_BUDGET)?.value;
    if mass < 1.0 - beta {
        return Err(Error::InvalidParameter("alternative mass is below 1 - beta"));
    }
    let null_mean = null_truncated_mean(set, 1e-3, derive_seed(seed, 8))?.value;
    let mut rng = seeded(derive_seed(seed, 9));
    let alt_mean = set.truncated_mean(mu2, DEFAULT_MC_BUDGET, &mut rng)?.value;
    let gap = null_mean.iter().zip(&alt_mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let lambda0 = strong_convexity_bound(1.0 - beta, norm(mu2), DEFAULT_CONVEXITY_CONSTANT);
    let floor = 0.25 * lambda0 * lambda0 * norm_sq(mu2);
    Ok(GapCheck { gap, floor, lambda0 })
}

/// Variance of N(0, 1) conditioned on `X ≤ t`.
pub fn upper_truncated_variance(t: f64) -> f64 {
    let lam = inverse_mills(t);
    1.0 - t * lam - lam * lam
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::upper_tail_quantile;

    fn half_line(eps: f64) -> TruncationSet {
        TruncationSet::half_space_tail(vec![1.0], upper_tail_quantile(eps)).unwrap()
    }

    #[test]
    fn full_space_closed_form() {
        let set = TruncationSet::full_space(1).unwrap();
        let ctx = LikelihoodContext::new(set, vec![0.7], Evaluation::Analytic).unwrap();
        for &v in &[-1.0, 0.0, 0.5, 0.7, 2.0] {
            // E[½x² − vx] + ½v² + ½ln 2π with x ~ N(0.7, 1)
            let expect = 0.5 * (1.0 + 0.49) - v * 0.7 + 0.5 * v * v + LN_SQRT_2PI;
            let got = neg_log_likelihood(&ctx, &[v]).unwrap().value;
            assert!((got - expect).abs() < 1e-14);
        }
        let g = grad_neg_log_likelihood(&ctx, &[0.7]).unwrap();
        assert_eq!(g.value, vec![0.0]);
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let set = half_line(0.2);
        let a = LikelihoodContext::new(set.clone(), vec![0.0], Evaluation::Analytic).unwrap();
        let q = LikelihoodContext::new(set, vec![0.0], Evaluation::Quadrature { tol: 1e-11 }).unwrap();
        for &v in &[-0.8, 0.0, 0.3, 1.0] {
            let la = neg_log_likelihood(&a, &[v]).unwrap().value;
            let lq = neg_log_likelihood(&q, &[v]).unwrap().value;
            assert!((la - lq).abs() < 1e-9, "v={v}: {la} vs {lq}");
        }
    }

    #[test]
    fn mode_restrictions() {
        let oracle = TruncationSet::oracle(2, |_| true).unwrap();
        assert!(LikelihoodContext::new(oracle.clone(), vec![0.0; 2], Evaluation::Analytic).is_err());
        let full4 = TruncationSet::full_space(4).unwrap();
        assert!(matches!(
            LikelihoodContext::new(full4, vec![0.0; 4], Evaluation::Quadrature { tol: 1e-9 }),
            Err(Error::Unsupported(_))
        ));
        assert!(LikelihoodContext::new(
            oracle,
            vec![0.0; 2],
            Evaluation::MonteCarlo { budget: 1000, seed: 1 }
        )
        .is_ok());
    }

    #[test]
    fn convexity_floor_values() {
        assert_eq!(strong_convexity_bound(1.0, 0.0, 1.0), 2f64.powi(-15));
        assert!(strong_convexity_bound(1.0, 1.0, 1.0) < strong_convexity_bound(1.0, 0.0, 1.0));
        let ctx = LikelihoodContext::new(
            TruncationSet::full_space(2).unwrap(),
            vec![0.0; 2],
            Evaluation::Analytic,
        )
        .unwrap();
        assert_eq!(strong_convexity_floor(&ctx, 1.0).unwrap(), 2f64.powi(-15));
        let h = numeric_hessian(&ctx, &[0.1, -0.2], 1e-3).unwrap();
        assert!((h.get(0, 0) - 1.0).abs() < 1e-6);
        assert!(h.get(0, 1).abs() < 1e-6);
    }

    #[test]
    fn null_mean_closed_forms() {
        let full = TruncationSet::full_space(3).unwrap();
        assert_eq!(null_truncated_mean(&full, 1e-3, 0).unwrap().value, vec![0.0; 3]);
        let b = 0.7;
        let v = crate::linalg::normalized(&[1.0, 2.0]).unwrap();
        let set = TruncationSet::half_space_tail(v.clone(), b).unwrap();
        let m = null_truncated_mean(&set, 1e-3, 0).unwrap().value;
        let shift = crate::special::norm_pdf(b) / crate::special::norm_cdf(b);
        for (mi, vi) in m.iter().zip(&v) {
            assert!((mi + vi * shift).abs() < 1e-15);
        }
    }

    #[test]
    fn null_mean_symmetric_slab() {
        let slab = TruncationSet::oracle(2, |x| x[0].abs() <= 0.8).unwrap();
        let est = null_truncated_mean(&slab, 2e-3, 5).unwrap();
        assert!(est.max_stderr() <= 2e-3);
        for (m, se) in est.value.iter().zip(&est.stderr) {
            assert!(m.abs() < 4.0 * se, "{est:?}");
        }
        assert!(matches!(
            null_truncated_mean(&slab, 1e-7, 5),
            Err(Error::AccuracyInfeasible { .. })
        ));
    }

    #[test]
    fn gap_on_full_space_is_exact() {
        let full = TruncationSet::full_space(3).unwrap();
        let mu2 = [0.1, 0.2, -0.2];
        let c = mean_gap_lower_bound_check(&full, &mu2, 0.0, 0).unwrap();
        assert!((c.gap - norm_sq(&mu2)).abs() < 1e-16);
        assert!(c.holds());
        let set = half_line(0.5);
        assert!(mean_gap_lower_bound_check(&set, &[0.0], 0.2, 0).is_err());
    }
}
