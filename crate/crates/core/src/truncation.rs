//! Truncation sets S ⊆ ℝ^d given as membership oracles, with closed-form mass
//! and truncated moments where the geometry allows it.
//!
//! Only [`SetKind::FullSpace`] and [`SetKind::HalfSpaceTail`] carry analytic
//! facilities. Every other kind is handled by Monte-Carlo with an explicit
//! generator and budget, and reports its standard error.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, normalized, SymMatrix};
use crate::rng::fill_gaussian;
use crate::special::{inverse_mills, norm_cdf, norm_quantile_upper};

/// Default number of accepted samples for Monte-Carlo moments.
pub const DEFAULT_MC_BUDGET: usize = 1_000_000;
/// Proposals allowed per requested accepted sample before giving up.
pub const DEFAULT_MAX_REJECTION_FACTOR: f64 = 100.0;

const UNIT_NORM_TOL: f64 = 1e-12;

pub type MembershipFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum SetKind {
    FullSpace,
    /// `{x : ⟨direction, x⟩ ≤ cutoff}`
    HalfSpaceTail { direction: Vec<f64>, cutoff: f64 },
    /// `{x : ‖x − center‖ ≥ radius}`
    BallComplement { center: Vec<f64>, radius: f64 },
    OracleOnly(MembershipFn),
}

impl fmt::Debug for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKind::FullSpace => f.write_str("FullSpace"),
            SetKind::HalfSpaceTail { direction, cutoff } => f
                .debug_struct("HalfSpaceTail")
                .field("direction", direction)
                .field("cutoff", cutoff)
                .finish(),
            SetKind::BallComplement { center, radius } => f
                .debug_struct("BallComplement")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            SetKind::OracleOnly(_) => f.write_str("OracleOnly(..)"),
        }
    }
}

/// A point estimate; `stderr == 0` and `samples == 0` mark exact values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, samples: 0 }
    }

    pub fn is_exact(&self) -> bool {
        self.samples == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

impl VectorEstimate {
    pub fn exact(value: Vec<f64>) -> Self {
        let stderr = vec![0.0; value.len()];
        Self { value, stderr, samples: 0 }
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TruncationSet {
    dim: usize,
    kind: SetKind,
}

impl TruncationSet {
    pub fn full_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive"));
        }
        Ok(Self { dim, kind: SetKind::FullSpace })
    }

    /// Half-space `{x : ⟨direction, x⟩ ≤ cutoff}`; `direction` must already be unit norm.
    pub fn half_space_tail(direction: Vec<f64>, cutoff: f64) -> Result<Self> {
        if direction.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive"));
        }
        let n = libm::sqrt(dot(&direction, &direction));
        if libm::fabs(n - 1.0) > UNIT_NORM_TOL {
            return Err(Error::InvalidParameter("half-space direction must have unit norm"));
        }
        if cutoff.is_nan() {
            return Err(Error::InvalidParameter("half-space cutoff is NaN"));
        }
        Ok(Self { dim: direction.len(), kind: SetKind::HalfSpaceTail { direction, cutoff } })
    }

    /// Like [`Self::half_space_tail`] but normalizes `direction` first.
    pub fn half_space_tail_normalized(direction: &[f64], cutoff: f64) -> Result<Self> {
        let v = normalized(direction)
            .ok_or(Error::InvalidParameter("half-space direction must be non-zero"))?;
        Self::half_space_tail(v, cutoff)
    }

    /// Removes the upper tail of mass `eps` along `direction` under N(mu, I):
    /// cutoff `⟨v, μ⟩ + √2·erf⁻¹(1 − 2ε)`. `eps = 0` is exactly the full space.
    pub fn tail_with_mass(direction: &[f64], mu: &[f64], eps: f64) -> Result<Self> {
        check_dim(direction.len(), mu.len())?;
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidParameter("tail mass must lie in [0, 1)"));
        }
        if eps == 0.0 {
            return Self::full_space(direction.len());
        }
        let v = normalized(direction)
            .ok_or(Error::InvalidParameter("half-space direction must be non-zero"))?;
        let cutoff = dot(&v, mu) + norm_quantile_upper(eps);
        Self::half_space_tail(v, cutoff)
    }

    pub fn ball_complement(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive"));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter("ball radius must be finite and non-negative"));
        }
        Ok(Self { dim: center.len(), kind: SetKind::BallComplement { center, radius } })
    }

    pub fn oracle<F>(dim: usize, membership: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive"));
        }
        Ok(Self { dim, kind: SetKind::OracleOnly(Arc::new(membership)) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self.kind, SetKind::FullSpace | SetKind::HalfSpaceTail { .. })
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        check_dim(self.dim, x.len())?;
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        match &self.kind {
            SetKind::FullSpace => true,
            SetKind::HalfSpaceTail { direction, cutoff } => dot(direction, x) <= *cutoff,
            SetKind::BallComplement { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 >= radius * radius
            }
            SetKind::OracleOnly(f) => f(x),
        }
    }

    /// Standardized cutoff `cutoff − ⟨v, μ⟩` of a half-space, `None` otherwise.
    fn standardized_cutoff(&self, mu: &[f64]) -> Option<(f64, &[f64])> {
        match &self.kind {
            SetKind::HalfSpaceTail { direction, cutoff } => {
                Some((cutoff - dot(direction, mu), direction.as_slice()))
            }
            _ => None,
        }
    }

    /// N(μ, I, S) for the closed-form kinds.
    pub fn analytic_mass(&self, mu: &[f64]) -> Option<f64> {
        match &self.kind {
            SetKind::FullSpace => Some(1.0),
            SetKind::HalfSpaceTail { .. } => {
                let (t, _) = self.standardized_cutoff(mu)?;
                Some(norm_cdf(t))
            }
            _ => None,
        }
    }

    /// N(μ, I, S): exact for closed-form kinds, otherwise the hit rate of
    /// `budget` proposals from N(μ, I).
    pub fn mass<R: Rng + ?Sized>(&self, mu: &[f64], rng: &mut R, budget: usize) -> Result<Estimate> {
        check_dim(self.dim, mu.len())?;
        if let Some(m) = self.analytic_mass(mu) {
            return Ok(Estimate::exact(m));
        }
        if budget == 0 {
            return Err(Error::InvalidParameter("Monte-Carlo budget must be positive"));
        }
        let mut x = vec![0.0; self.dim];
        let mut hits = 0usize;
        for _ in 0..budget {
            fill_gaussian(rng, mu, &mut x);
            if self.contains_unchecked(&x) {
                hits += 1;
            }
        }
        if hits == 0 {
            return Err(Error::NullSet { budget });
        }
        let p = hits as f64 / budget as f64;
        Ok(Estimate { value: p, stderr: libm::sqrt(p * (1.0 - p) / budget as f64), samples: budget })
    }

    /// μ_S for the closed-form kinds: `μ − v·φ(t)/Φ(t)` with `t = b − ⟨v, μ⟩`.
    pub fn analytic_truncated_mean(&self, mu: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            SetKind::FullSpace => Some(mu.to_vec()),
            SetKind::HalfSpaceTail { .. } => {
                let (t, v) = self.standardized_cutoff(mu)?;
                let shift = inverse_mills(t);
                Some(mu.iter().zip(v).map(|(m, vi)| m - vi * shift).collect())
            }
            _ => None,
        }
    }

    /// Σ_S for the closed-form kinds: `I + (σ²_t − 1)·v vᵀ` along the half-space normal.
    pub fn analytic_truncated_covariance(&self, mu: &[f64]) -> Option<SymMatrix> {
        match &self.kind {
            SetKind::FullSpace => Some(SymMatrix::identity(self.dim)),
            SetKind::HalfSpaceTail { .. } => {
                let (t, v) = self.standardized_cutoff(mu)?;
                let lam = inverse_mills(t);
                let shrink = -(t * lam + lam * lam);
                let mut m = SymMatrix::identity(self.dim);
                for i in 0..self.dim {
                    for j in i..self.dim {
                        m.set(i, j, m.get(i, j) + shrink * v[i] * v[j]);
                    }
                }
                Some(m)
            }
            _ => None,
        }
    }

    /// μ_S = E[x], x ~ N(μ, I, S). Exact for closed-form kinds; otherwise the
    /// mean of `budget` accepted rejection samples.
    pub fn truncated_mean<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        budget: usize,
        rng: &mut R,
    ) -> Result<VectorEstimate> {
        check_dim(self.dim, mu.len())?;
        if let Some(m) = self.analytic_truncated_mean(mu) {
            return Ok(VectorEstimate::exact(m));
        }
        let moments = self.monte_carlo_moments(mu, budget, rng, false)?;
        Ok(moments.mean_estimate())
    }

    /// Monte-Carlo estimate of `‖Σ_S − I_d‖_F`.
    ///
    /// The standard error comes from ten independent batches of the budget.
    pub fn truncated_covariance_frobenius_gap<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        budget: usize,
        rng: &mut R,
    ) -> Result<Estimate> {
        check_dim(self.dim, mu.len())?;
        const BATCHES: usize = 10;
        if budget < 2 * BATCHES {
            return Err(Error::InvalidParameter("covariance budget must be at least 20"));
        }
        let per_batch = budget / BATCHES;
        let mut total = MomentAccumulator::new(self.dim, true);
        let mut gaps = [0.0; BATCHES];
        for g in gaps.iter_mut() {
            let batch = self.monte_carlo_moments(mu, per_batch, rng, true)?;
            *g = batch.covariance().frobenius_distance_to_identity();
            total.merge(&batch);
        }
        let mean_gap = gaps.iter().sum::<f64>() / BATCHES as f64;
        let var = gaps.iter().map(|g| (g - mean_gap) * (g - mean_gap)).sum::<f64>()
            / (BATCHES - 1) as f64;
        Ok(Estimate {
            value: total.covariance().frobenius_distance_to_identity(),
            stderr: libm::sqrt(var / BATCHES as f64),
            samples: total.count,
        })
    }

    fn monte_carlo_moments<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        budget: usize,
        rng: &mut R,
        with_cov: bool,
    ) -> Result<MomentAccumulator> {
        if budget < 2 {
            return Err(Error::InvalidParameter("Monte-Carlo budget must be at least 2"));
        }
        let max_proposals = libm::ceil(budget as f64 * DEFAULT_MAX_REJECTION_FACTOR) as usize;
        let mut acc = MomentAccumulator::new(self.dim, with_cov);
        let mut x = vec![0.0; self.dim];
        let mut proposals = 0usize;
        while acc.count < budget {
            if proposals >= max_proposals {
                return Err(Error::SamplingEfficiency {
                    accepted: acc.count,
                    proposals,
                    requested: budget,
                });
            }
            proposals += 1;
            fill_gaussian(rng, mu, &mut x);
            if self.contains_unchecked(&x) {
                acc.push(&x);
            }
        }
        Ok(acc)
    }

    pub fn description(&self) -> SetDescription {
        let mut desc = SetDescription {
            kind: String::from(match self.kind {
                SetKind::FullSpace => "full_space",
                SetKind::HalfSpaceTail { .. } => "half_space_tail",
                SetKind::BallComplement { .. } => "ball_complement",
                SetKind::OracleOnly(_) => "oracle_only",
            }),
            dim: self.dim,
            direction: None,
            cutoff: None,
            center: None,
            radius: None,
        };
        match &self.kind {
            SetKind::HalfSpaceTail { direction, cutoff } => {
                desc.direction = Some(direction.clone());
                desc.cutoff = Some(*cutoff);
            }
            SetKind::BallComplement { center, radius } => {
                desc.center = Some(center.clone());
                desc.radius = Some(*radius);
            }
            _ => {}
        }
        desc
    }
}

/// Serialized form `{kind, dim, direction?, cutoff?, center?, radius?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetDescription {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl TryFrom<&SetDescription> for TruncationSet {
    type Error = Error;

    fn try_from(desc: &SetDescription) -> Result<Self> {
        let set = match desc.kind.as_str() {
            "full_space" => Self::full_space(desc.dim)?,
            "half_space_tail" => {
                let direction = desc
                    .direction
                    .clone()
                    .ok_or(Error::InvalidParameter("half_space_tail needs a direction"))?;
                let cutoff =
                    desc.cutoff.ok_or(Error::InvalidParameter("half_space_tail needs a cutoff"))?;
                Self::half_space_tail_normalized(&direction, cutoff)?
            }
            "ball_complement" => {
                let center = desc
                    .center
                    .clone()
                    .ok_or(Error::InvalidParameter("ball_complement needs a center"))?;
                let radius =
                    desc.radius.ok_or(Error::InvalidParameter("ball_complement needs a radius"))?;
                Self::ball_complement(center, radius)?
            }
            "oracle_only" => {
                return Err(Error::Unsupported("oracle-only sets cannot be rebuilt from JSON"))
            }
            _ => return Err(Error::InvalidParameter("unknown set kind")),
        };
        check_dim(desc.dim, set.dim())?;
        Ok(set)
    }
}

/// N(μ, I_d, S): a pre-truncation mean together with its truncation set.
#[derive(Debug, Clone)]
pub struct TruncatedGaussianSpec {
    mu: Vec<f64>,
    set: TruncationSet,
}

impl TruncatedGaussianSpec {
    pub fn new(mu: Vec<f64>, set: TruncationSet) -> Result<Self> {
        check_dim(set.dim(), mu.len())?;
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite"));
        }
        if let Some(m) = set.analytic_mass(&mu) {
            if m <= 0.0 {
                return Err(Error::InvalidParameter("truncation set has zero mass"));
            }
        }
        Ok(Self { mu, set })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn set(&self) -> &TruncationSet {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Streaming first and (optionally) second moments.
#[derive(Debug, Clone)]
pub(crate) struct MomentAccumulator {
    count: usize,
    mean: Vec<f64>,
    m2_diag: Vec<f64>,
    comoment: Option<Vec<f64>>,
}

impl MomentAccumulator {
    fn new(dim: usize, with_cov: bool) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2_diag: vec![0.0; dim],
            comoment: with_cov.then(|| vec![0.0; dim * dim]),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        let d = self.mean.len();
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            self.m2_diag[i] += delta[i] * (x[i] - self.mean[i]);
        }
        if let Some(c) = self.comoment.as_mut() {
            for i in 0..d {
                for j in i..d {
                    c[i * d + j] += delta[i] * (x[j] - self.mean[j]);
                }
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        let d = self.mean.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..d {
            self.m2_diag[i] += other.m2_diag[i] + delta[i] * delta[i] * na * nb / n;
        }
        if let (Some(c), Some(oc)) = (self.comoment.as_mut(), other.comoment.as_ref()) {
            for i in 0..d {
                for j in i..d {
                    c[i * d + j] += oc[i * d + j] + delta[i] * delta[j] * na * nb / n;
                }
            }
        }
        for i in 0..d {
            self.mean[i] += delta[i] * nb / n;
        }
        self.count += other.count;
    }

    fn mean_estimate(&self) -> VectorEstimate {
        let n = self.count as f64;
        let stderr = self.m2_diag.iter().map(|m2| libm::sqrt(m2 / (n - 1.0) / n)).collect();
        VectorEstimate { value: self.mean.clone(), stderr, samples: self.count }
    }

    fn covariance(&self) -> SymMatrix {
        let d = self.mean.len();
        let c = self.comoment.as_ref().expect("covariance accumulation enabled");
        let n = self.count as f64;
        let data = c.iter().map(|x| x / (n - 1.0)).collect();
        SymMatrix::from_row_major(d, data).expect("square")
    }
}
