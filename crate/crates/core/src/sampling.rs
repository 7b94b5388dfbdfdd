//! Rejection sampling from N(μ, I_d, S): propose from the untruncated
//! Gaussian and keep the proposals the membership oracle accepts.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{fill_gaussian, seeded};
use crate::truncation::{TruncatedGaussianSpec, DEFAULT_MAX_REJECTION_FACTOR};

/// `n` accepted samples stored row-major, with the seed and proposal count
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    data: Vec<f64>,
    n: usize,
    dim: usize,
    seed: u64,
    proposals_used: usize,
}

impl SampleBatch {
    /// Wraps externally produced rows. `proposals_used` must be at least `n`.
    pub fn from_rows(
        data: Vec<f64>,
        dim: usize,
        seed: u64,
        proposals_used: usize,
    ) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter("row data length must be a multiple of dim"));
        }
        let n = data.len() / dim;
        if proposals_used < n {
            return Err(Error::InvalidParameter("proposals_used must be at least the row count"));
        }
        Ok(Self { data, n, dim, seed, proposals_used })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn proposals_used(&self) -> usize {
        self.proposals_used
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals_used == 0 {
            return 0.0;
        }
        self.n as f64 / self.proposals_used as f64
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Values of coordinate `j` across all rows.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Draws `n` i.i.d. rows from N(μ, I, S).
///
/// Deterministic in `(spec, n, seed)`. Fails with
/// [`Error::SamplingEfficiency`] once more than
/// `max_rejection_factor · n` proposals have been spent, i.e. when the empirical
/// acceptance rate drops below `1 / max_rejection_factor`.
pub fn sample_truncated(
    spec: &TruncatedGaussianSpec,
    n: usize,
    seed: u64,
    max_rejection_factor: f64,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive"));
    }
    if !(max_rejection_factor >= 1.0) {
        return Err(Error::InvalidParameter("max_rejection_factor must be at least 1"));
    }
    let d = spec.dim();
    let set = spec.set();
    let max_proposals = libm::ceil(max_rejection_factor * n as f64) as usize;
    let mut rng = seeded(seed);
    let mut data = vec![0.0; n * d];
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    while accepted < n {
        if proposals >= max_proposals {
            return Err(Error::SamplingEfficiency { accepted, proposals, requested: n });
        }
        proposals += 1;
        let row = &mut data[accepted * d..(accepted + 1) * d];
        fill_gaussian(&mut rng, spec.mu(), row);
        if set.contains_unchecked(row) {
            accepted += 1;
        }
    }
    Ok(SampleBatch { data, n, dim: d, seed, proposals_used: proposals })
}

/// Splits a batch of `2n` rows into the first `n` rows and the last `n` rows.
pub fn split_batch(batch: &SampleBatch) -> Result<(SampleBatch, SampleBatch)> {
    if batch.n == 0 || !batch.n.is_multiple_of(2) {
        return Err(Error::InvalidParameter("split_batch needs a positive even row count"));
    }
    let half = batch.n / 2;
    let cut = half * batch.dim;
    let p_first = batch.proposals_used.div_ceil(2);
    let mk = |data: &[f64], proposals_used| SampleBatch {
        data: data.to_vec(),
        n: half,
        dim: batch.dim,
        seed: batch.seed,
        proposals_used,
    };
    Ok((mk(&batch.data[..cut], p_first), mk(&batch.data[cut..], batch.proposals_used - p_first)))
}

/// Anything that can hand out i.i.d. batches from a fixed d-dimensional law.
pub trait SampleSource {
    fn dim(&self) -> usize;
    fn draw(&self, n: usize, seed: u64) -> Result<SampleBatch>;
}

/// [`sample_truncated`] bound to a spec and a rejection budget.
#[derive(Debug, Clone)]
pub struct RejectionSampler {
    spec: TruncatedGaussianSpec,
    max_rejection_factor: f64,
}

impl RejectionSampler {
    pub fn new(spec: TruncatedGaussianSpec) -> Self {
        Self { spec, max_rejection_factor: DEFAULT_MAX_REJECTION_FACTOR }
    }

    pub fn with_max_rejection_factor(mut self, factor: f64) -> Self {
        self.max_rejection_factor = factor;
        self
    }

    pub fn spec(&self) -> &TruncatedGaussianSpec {
        &self.spec
    }
}

impl SampleSource for RejectionSampler {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn draw(&self, n: usize, seed: u64) -> Result<SampleBatch> {
        sample_truncated(&self.spec, n, seed, self.max_rejection_factor)
    }
}
