//! The three decision procedures and their threshold calibration.
//!
//! | tester          | samples               | statistic        | accept iff            |
//! |-----------------|-----------------------|------------------|-----------------------|
//! | `UnknownTrunc`  | 2n, n = ⌈c_n√d/α²⌉    | Z                | \|Z\| ≤ c_thr·√d/n    |
//! | `KnownTrunc`    | 2n, n = ⌈c_n√d/α²⌉    | Z₁               | \|Z₁\| ≤ c_thr·α²     |
//! | `LearnThenTest` | n = ⌈c_n·d/α²⌉        | ‖μ̂‖₂             | ‖μ̂‖₂ ≤ c_thr·α        |
//!
//! Ties accept.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::null_truncated_mean;
use crate::linalg::norm;
use crate::rng::derive_seed;
use crate::sampling::{split_batch, RejectionSampler, SampleBatch, SampleSource};
use crate::special::inverse_mills;
use crate::statistics::{empirical_moments, statistic_z, statistic_z1};
use crate::truncation::{TruncatedGaussianSpec, TruncationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TesterKind {
    UnknownTrunc,
    KnownTrunc,
    LearnThenTest,
}

impl TesterKind {
    pub const ALL: [TesterKind; 3] =
        [TesterKind::UnknownTrunc, TesterKind::KnownTrunc, TesterKind::LearnThenTest];

    pub fn name(self) -> &'static str {
        match self {
            TesterKind::UnknownTrunc => "UnknownTrunc",
            TesterKind::KnownTrunc => "KnownTrunc",
            TesterKind::LearnThenTest => "LearnThenTest",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn default_c_n(self) -> f64 {
        match self {
            TesterKind::UnknownTrunc | TesterKind::KnownTrunc => 40.0,
            TesterKind::LearnThenTest => 20.0,
        }
    }

    /// Threshold constant used before calibration. For `LearnThenTest` this
    /// is the α/2 rule.
    pub fn default_c_thr(self) -> f64 {
        match self {
            TesterKind::UnknownTrunc => 1.5,
            TesterKind::KnownTrunc => 0.1,
            TesterKind::LearnThenTest => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn name(self) -> &'static str {
        match self {
            Decision::Accept => "ACCEPT",
            Decision::Reject => "REJECT",
        }
    }

    fn from_comparison(statistic: f64, threshold: f64) -> Self {
        if statistic.abs() <= threshold {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
    /// Samples per half for the two-sample testers, total for `LearnThenTest`.
    pub n_used: usize,
    pub tester: TesterKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub alpha: f64,
    pub c_n: f64,
    pub c_thr: f64,
    pub seed: u64,
}

impl TesterConfig {
    pub fn with_defaults(kind: TesterKind, alpha: f64, seed: u64) -> Self {
        Self { alpha, c_n: kind.default_c_n(), c_thr: kind.default_c_thr(), seed }
    }

    pub fn validate(&self, kind: TesterKind) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1]"));
        }
        if kind == TesterKind::KnownTrunc && self.alpha > 0.25 {
            return Err(Error::InvalidParameter("known-truncation tester needs alpha <= 1/4"));
        }
        if !(self.c_n > 0.0 && self.c_n.is_finite()) {
            return Err(Error::InvalidParameter("c_n must be positive"));
        }
        if !(self.c_thr > 0.0 && self.c_thr.is_finite()) {
            return Err(Error::InvalidParameter("c_thr must be positive"));
        }
        Ok(())
    }

    /// `⌈c_n·√d/α²⌉`, or `⌈c_n·d/α²⌉` for `LearnThenTest`.
    pub fn sample_size(&self, kind: TesterKind, d: usize) -> usize {
        let a2 = self.alpha * self.alpha;
        let scale = match kind {
            TesterKind::LearnThenTest => d as f64,
            _ => libm::sqrt(d as f64),
        };
        libm::ceil(self.c_n * scale / a2) as usize
    }

    pub fn threshold(&self, kind: TesterKind, d: usize, n: usize) -> f64 {
        match kind {
            TesterKind::UnknownTrunc => self.c_thr * libm::sqrt(d as f64) / n as f64,
            TesterKind::KnownTrunc => self.c_thr * self.alpha * self.alpha,
            TesterKind::LearnThenTest => self.c_thr * self.alpha,
        }
    }

    /// Statistic in units of the threshold constant: the tester accepts iff
    /// this is at most `c_thr`.
    pub fn normalize(&self, kind: TesterKind, d: usize, n: usize, statistic: f64) -> f64 {
        let unit = match kind {
            TesterKind::UnknownTrunc => libm::sqrt(d as f64) / n as f64,
            TesterKind::KnownTrunc => self.alpha * self.alpha,
            TesterKind::LearnThenTest => self.alpha,
        };
        statistic.abs() / unit
    }
}

fn check_source(source: &dyn SampleSource, d: usize) -> Result<()> {
    check_dim(d, source.dim())
}

/// Inner-product tester for an unknown truncation set.
pub fn test_unknown_truncation(
    source: &dyn SampleSource,
    d: usize,
    cfg: &TesterConfig,
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::UnknownTrunc)?;
    test_unknown_truncation_with_n(source, d, cfg, cfg.sample_size(TesterKind::UnknownTrunc, d))
}

/// [`test_unknown_truncation`] with an explicit per-half sample count.
pub fn test_unknown_truncation_with_n(
    source: &dyn SampleSource,
    d: usize,
    cfg: &TesterConfig,
    n: usize,
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::UnknownTrunc)?;
    check_source(source, d)?;
    let (x, y) = split_batch(&source.draw(2 * n, cfg.seed)?)?;
    let z = statistic_z(&x, &y)?.value;
    let threshold = cfg.threshold(TesterKind::UnknownTrunc, d, n);
    Ok(TestVerdict {
        decision: Decision::from_comparison(z, threshold),
        statistic: z,
        threshold,
        n_used: n,
        tester: TesterKind::UnknownTrunc,
    })
}

/// Inner-product tester for a known truncation set, centered at `mu_s_null = E_{N(0,I,S)}[x]`.
pub fn test_known_truncation(
    source: &dyn SampleSource,
    set: &TruncationSet,
    d: usize,
    cfg: &TesterConfig,
    mu_s_null: &[f64],
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::KnownTrunc)?;
    let n = cfg.sample_size(TesterKind::KnownTrunc, d);
    test_known_truncation_with_n(source, set, d, cfg, mu_s_null, n)
}

pub fn test_known_truncation_with_n(
    source: &dyn SampleSource,
    set: &TruncationSet,
    d: usize,
    cfg: &TesterConfig,
    mu_s_null: &[f64],
    n: usize,
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::KnownTrunc)?;
    check_source(source, d)?;
    check_dim(d, set.dim())?;
    check_dim(d, mu_s_null.len())?;
    let (x, y) = split_batch(&source.draw(2 * n, cfg.seed)?)?;
    let z1 = statistic_z1(&x, &y, mu_s_null)?.value;
    let threshold = cfg.threshold(TesterKind::KnownTrunc, d, n);
    Ok(TestVerdict {
        decision: Decision::from_comparison(z1, threshold),
        statistic: z1,
        threshold,
        n_used: n,
        tester: TesterKind::KnownTrunc,
    })
}

/// Robust estimators of the pre-truncation mean for the learn-then-test
/// baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MeanEstimator {
    /// Sample mean plus a correction along the least-variance direction when
    /// that direction shows a variance deficit beyond the sampling edge.
    #[default]
    TailCorrected,
    CoordinateMedian,
}

impl MeanEstimator {
    pub fn estimate(self, batch: &SampleBatch) -> Result<Vec<f64>> {
        match self {
            MeanEstimator::TailCorrected => tail_corrected_mean(batch),
            MeanEstimator::CoordinateMedian => Ok(coordinate_median(batch)),
        }
    }
}

pub fn coordinate_median(batch: &SampleBatch) -> Vec<f64> {
    (0..batch.dim())
        .map(|j| {
            let mut col = batch.column(j);
            let n = col.len();
            let mid = n / 2;
            let (_, hi, _) = col.select_nth_unstable_by(mid, f64::total_cmp);
            let hi = *hi;
            if n % 2 == 1 {
                hi
            } else {
                let lo = col[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                0.5 * (lo + hi)
            }
        })
        .collect()
}

/// Variance of N(0, 1) conditioned on `X ≤ t`.
fn upper_cut_variance(t: f64) -> f64 {
    let lam = inverse_mills(t);
    1.0 - t * lam - lam * lam
}

/// Inverts [`upper_cut_variance`] (increasing in `t`) by bisection.
fn cutoff_for_variance(var: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    if var <= upper_cut_variance(lo) {
        return lo;
    }
    if var >= upper_cut_variance(hi) {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if upper_cut_variance(mid) < var {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Half-space-aware mean estimate.
///
/// A unit-variance Gaussian cut by a half-space has variance
/// `1 − tλ(t) − λ(t)²` along the normal (λ the inverse Mills ratio, `t` the
/// standardized cutoff) and its mean moves by `λ(t)` away from the cut. The
/// smallest sample-covariance eigenvalue is mapped back to a population spike
/// through the Marchenko–Pastur spike relation, the spike gives `t`, and the
/// sign of the skewness along the eigenvector says which side was cut.
pub fn tail_corrected_mean(batch: &SampleBatch) -> Result<Vec<f64>> {
    let (mean, cov) = empirical_moments(batch)?;
    let d = batch.dim() as f64;
    let gamma = d / (batch.len() as f64 - 1.0);
    if gamma >= 1.0 {
        return Ok(mean);
    }
    let (values, vectors) = cov.symmetric_eigen();
    let lambda = values[0];
    let edge = (1.0 - libm::sqrt(gamma)) * (1.0 - libm::sqrt(gamma));
    if lambda >= edge {
        return Ok(mean);
    }
    let u = &vectors[0];
    let s = 1.0 + lambda - gamma;
    let spike = 0.5 * (s - libm::sqrt((s * s - 4.0 * lambda).max(0.0)));
    let shift = inverse_mills(cutoff_for_variance(spike.max(0.0)));
    let m3: f64 = batch
        .rows()
        .map(|x| {
            let p = x.iter().zip(&mean).zip(u).map(|((a, m), ui)| (a - m) * ui).sum::<f64>();
            p * p * p
        })
        .sum();
    // Removing the upper tail along u skews the projections to the left.
    let sign = if m3 < 0.0 { 1.0 } else { -1.0 };
    Ok(mean.iter().zip(u).map(|(m, ui)| m + sign * shift * ui).collect())
}

/// Learn-then-test baseline with the default estimator.
pub fn test_learn_then_test(
    source: &dyn SampleSource,
    d: usize,
    cfg: &TesterConfig,
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::LearnThenTest)?;
    let n = cfg.sample_size(TesterKind::LearnThenTest, d);
    test_learn_then_test_with(source, d, cfg, n, MeanEstimator::default())
}

pub fn test_learn_then_test_with(
    source: &dyn SampleSource,
    d: usize,
    cfg: &TesterConfig,
    n: usize,
    estimator: MeanEstimator,
) -> Result<TestVerdict> {
    cfg.validate(TesterKind::LearnThenTest)?;
    check_source(source, d)?;
    let batch = source.draw(n, cfg.seed)?;
    let mu_hat = estimator.estimate(&batch)?;
    let stat = norm(&mu_hat);
    let threshold = cfg.threshold(TesterKind::LearnThenTest, d, n);
    Ok(TestVerdict {
        decision: Decision::from_comparison(stat, threshold),
        statistic: stat,
        threshold,
        n_used: n,
        tester: TesterKind::LearnThenTest,
    })
}

/// Fixed ladder of threshold constants searched by calibration.
pub const THRESHOLD_LADDER: [f64; 13] =
    [0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0];

/// Minimum ACCEPT rate demanded of every null instance.
pub const CALIBRATION_ACCEPT_RATE: f64 = 0.8;

/// A completeness instance for calibration: the law to sample and the α the
/// tester will run at.
#[derive(Debug, Clone)]
pub struct NullInstance {
    pub spec: TruncatedGaussianSpec,
    pub alpha: f64,
}

impl NullInstance {
    pub fn new(spec: TruncatedGaussianSpec, alpha: f64) -> Self {
        Self { spec, alpha }
    }
}

/// Runs one trial of `kind` on `inst` and returns its statistic in units of
/// the threshold constant (see [`TesterConfig::normalize`]).
pub fn normalized_statistic(
    kind: TesterKind,
    inst: &NullInstance,
    c_n: f64,
    mu_s_null: Option<&[f64]>,
    seed: u64,
) -> Result<f64> {
    // c_thr is irrelevant to the statistic itself.
    let cfg = TesterConfig { alpha: inst.alpha, c_n, c_thr: 1.0, seed };
    let d = inst.spec.dim();
    let source = RejectionSampler::new(inst.spec.clone());
    let v = match kind {
        TesterKind::UnknownTrunc => test_unknown_truncation(&source, d, &cfg)?,
        TesterKind::KnownTrunc => {
            let centre = mu_s_null.ok_or(Error::InvalidParameter("known tester needs mu_s_null"))?;
            test_known_truncation(&source, inst.spec.set(), d, &cfg, centre)?
        }
        TesterKind::LearnThenTest => test_learn_then_test(&source, d, &cfg)?,
    };
    Ok(cfg.normalize(kind, d, v.n_used, v.statistic))
}

/// Smallest ladder value under which at least [`CALIBRATION_ACCEPT_RATE`]
/// of every instance's normalized statistics fall.
pub fn select_threshold(per_instance: &[Vec<f64>]) -> Result<f64> {
    if per_instance.is_empty() {
        return Err(Error::Calibration("empty null grid".into()));
    }
    if per_instance.iter().any(|s| s.is_empty()) {
        return Err(Error::Calibration("null instance without trials".into()));
    }
    THRESHOLD_LADDER
        .into_iter()
        .find(|&c| {
            per_instance.iter().all(|stats| {
                let ok = stats.iter().filter(|s| **s <= c).count();
                ok as f64 >= CALIBRATION_ACCEPT_RATE * stats.len() as f64
            })
        })
        .ok_or_else(|| {
            Error::Calibration(format!(
                "no ladder value up to {} reaches an ACCEPT rate of {}",
                THRESHOLD_LADDER[THRESHOLD_LADDER.len() - 1],
                CALIBRATION_ACCEPT_RATE
            ))
        })
}

/// Calibrates `c_thr` for `kind` on completeness instances.
///
/// `c_n` stays at the kind's default. The returned config carries the first
/// instance's α and `base_seed`. Known-truncation centering uses μ′_S to
/// accuracy α²/100.
pub fn calibrate_constants(
    kind: TesterKind,
    null_grid: &[NullInstance],
    trials: usize,
    base_seed: u64,
) -> Result<TesterConfig> {
    if null_grid.is_empty() {
        return Err(Error::Calibration("empty null grid".into()));
    }
    if trials == 0 {
        return Err(Error::Calibration("calibration needs at least one trial".into()));
    }
    let c_n = kind.default_c_n();
    let mut per_instance = Vec::with_capacity(null_grid.len());
    for (i, inst) in null_grid.iter().enumerate() {
        let inst_seed = derive_seed(base_seed, i as u64);
        let centre = match kind {
            TesterKind::KnownTrunc => Some(
                null_truncated_mean(inst.spec.set(), inst.alpha * inst.alpha / 100.0, inst_seed)?
                    .value,
            ),
            _ => None,
        };
        let stats = (0..trials)
            .map(|t| {
                normalized_statistic(kind, inst, c_n, centre.as_deref(), derive_seed(inst_seed, t as u64 + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        per_instance.push(stats);
    }
    let c_thr = select_threshold(&per_instance)?;
    Ok(TesterConfig { alpha: null_grid[0].alpha, c_n, c_thr, seed: base_seed })
}

/// `c_thr·√d/n` and `c_thr·α²/c_n` coincide at `n = c_n√d/α²`; this returns
/// both sides, using the unrounded `n`.
pub fn threshold_scale_identity(cfg: &TesterConfig, d: usize) -> (f64, f64) {
    let n = cfg.c_n * libm::sqrt(d as f64) / (cfg.alpha * cfg.alpha);
    let lhs = cfg.c_thr * libm::sqrt(d as f64) / n;
    let rhs = cfg.c_thr * cfg.alpha * cfg.alpha / cfg.c_n;
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardinstance::{calibrate_hard_instance, embed};
    use crate::statistics::column_means;
    use alloc::vec;

    fn full(d: usize, mu: Vec<f64>) -> RejectionSampler {
        RejectionSampler::new(
            TruncatedGaussianSpec::new(mu, TruncationSet::full_space(d).unwrap()).unwrap(),
        )
    }

    #[test]
    fn sample_sizes() {
        let cfg = TesterConfig { alpha: 0.5, c_n: 40.0, c_thr: 1.0, seed: 0 };
        assert_eq!(cfg.sample_size(TesterKind::UnknownTrunc, 64), 1280);
        assert_eq!(cfg.sample_size(TesterKind::LearnThenTest, 64), 10240);
        let (a, b) = threshold_scale_identity(&cfg, 64);
        assert!((a - b).abs() <= 1e-15 * b);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TesterConfig::with_defaults(TesterKind::KnownTrunc, 0.3, 0);
        assert!(cfg.validate(TesterKind::KnownTrunc).is_err());
        assert!(cfg.validate(TesterKind::UnknownTrunc).is_ok());
        cfg.alpha = 0.2;
        cfg.c_thr = 0.0;
        assert!(cfg.validate(TesterKind::KnownTrunc).is_err());
        cfg.c_thr = 1.0;
        cfg.c_n = -1.0;
        assert!(cfg.validate(TesterKind::KnownTrunc).is_err());
        assert!(TesterConfig::with_defaults(TesterKind::UnknownTrunc, 1.5, 0)
            .validate(TesterKind::UnknownTrunc)
            .is_err());
    }

    #[test]
    fn tie_accepts() {
        assert_eq!(Decision::from_comparison(-0.5, 0.5), Decision::Accept);
        assert_eq!(Decision::from_comparison(0.5 + 1e-16, 0.5), Decision::Reject);
    }

    #[test]
    fn verdicts_are_deterministic() {
        let src = full(8, vec![0.0; 8]);
        let cfg = TesterConfig::with_defaults(TesterKind::UnknownTrunc, 0.5, 3);
        let a = test_unknown_truncation(&src, 8, &cfg).unwrap();
        let b = test_unknown_truncation(&src, 8, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.decision == Decision::Accept, a.statistic.abs() <= a.threshold);
    }

    #[test]
    fn wrong_dimensions() {
        let src = full(4, vec![0.0; 4]);
        let cfg = TesterConfig::with_defaults(TesterKind::KnownTrunc, 0.2, 0);
        let set = TruncationSet::full_space(4).unwrap();
        assert!(test_unknown_truncation(&src, 5, &cfg).is_err());
        assert!(test_known_truncation(&src, &set, 4, &cfg, &[0.0; 3]).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        let b = SampleBatch::from_rows(vec![3.0, 1.0, 2.0, 10.0], 1, 0, 4).unwrap();
        assert_eq!(coordinate_median(&b), vec![2.5]);
        let b = SampleBatch::from_rows(vec![3.0, 1.0, 2.0], 1, 0, 3).unwrap();
        assert_eq!(coordinate_median(&b), vec![2.0]);
    }

    #[test]
    fn cut_variance_inversion() {
        for &t in &[-3.0, -0.5, 0.0, 1.28, 4.0] {
            let v = upper_cut_variance(t);
            assert!((cutoff_for_variance(v) - t).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn tail_correction_recovers_hidden_shift() {
        let h = calibrate_hard_instance(0.1).unwrap();
        let e = embed(&h, 8, 4).unwrap();
        let batch = RejectionSampler::new(e.spec().unwrap()).draw(40_000, 9).unwrap();
        let plain = norm(&column_means(&batch));
        let corrected = tail_corrected_mean(&batch).unwrap();
        assert!(plain < 0.05);
        let err: f64 =
            corrected.iter().zip(e.mean()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        assert!(libm::sqrt(err) < 0.05, "{corrected:?} vs {:?}", e.mean());
    }

    #[test]
    fn calibration_edge_cases() {
        assert!(matches!(
            calibrate_constants(TesterKind::UnknownTrunc, &[], 10, 0),
            Err(Error::Calibration(_))
        ));
        assert!(select_threshold(&[vec![0.01; 10]]).unwrap() == 0.02);
        assert!(select_threshold(&[vec![11.0; 10]]).is_err());
    }
}
