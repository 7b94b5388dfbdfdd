//! Gaussian mean testing when samples arrive through an unknown (or known)
//! truncation set.
//!
//! The crate is `no_std` with `alloc`. Sampling is deterministic in the seed
//! (ChaCha8); every Monte-Carlo quantity reports its standard error.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod hardinstance;
pub mod likelihood;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod sampling;
pub mod special;
pub mod statistics;
pub mod testers;
pub mod truncation;

pub use error::{Error, Result};
pub use hardinstance::{
    calibrate_hard_instance, chi_square_closed_form, chi_square_quadrature, embed,
    sample_complexity_floor, EmbeddedHardInstance, HardInstance1D, HardInstanceRecord,
};
pub use sampling::{sample_truncated, split_batch, RejectionSampler, SampleBatch, SampleSource};
pub use statistics::{statistic_z, statistic_z1, StatisticKind, StatisticReport};
pub use testers::{
    calibrate_constants, test_known_truncation, test_learn_then_test, test_unknown_truncation,
    Decision, MeanEstimator, TestVerdict, TesterConfig, TesterKind,
};
pub use truncation::{SetKind, TruncatedGaussianSpec, TruncationSet};
