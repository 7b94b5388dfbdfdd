//! Experiment harness around `trunctest-core`: instance families, threshold
//! calibration manifests, resumable power-curve sweeps, report files, and the
//! property checks shared by `trunctest verify` and the acceptance suite.

pub mod checks;
pub mod error;
pub mod instance;
pub mod manifest;
pub mod report;
pub mod sweep;

pub use error::BenchError;

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

/// Written into every result row where a VCS revision would go.
pub const COMMIT_PLACEHOLDER: &str = "-";
