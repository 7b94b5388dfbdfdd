use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or batch had the wrong dimension or row count.
    DimensionMismatch { expected: usize, found: usize },
    InvalidParameter(&'static str),
    /// Monte-Carlo mass estimation saw no point of the set.
    NullSet { budget: usize },
    /// Rejection sampling ran out of proposals.
    SamplingEfficiency { accepted: usize, proposals: usize, requested: usize },
    /// The requested operation has no analytic or quadrature route for this set kind.
    Unsupported(&'static str),
    QuadratureDidNotConverge { estimate: f64, abs_error: f64 },
    /// The Monte-Carlo budget cap cannot reach the requested accuracy.
    AccuracyInfeasible { requested: f64, achievable: f64 },
    Calibration(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::NullSet { budget } => {
                write!(f, "set appears null: no hits in {budget} Monte-Carlo proposals")
            }
            Error::SamplingEfficiency { accepted, proposals, requested } => {
                let rate = *accepted as f64 / (*proposals).max(1) as f64;
                write!(
                    f,
                    "rejection sampler exhausted {proposals} proposals with {accepted}/{requested} \
                     accepted (acceptance rate {rate:.3e})"
                )
            }
            Error::Unsupported(what) => write!(f, "unsupported: {what}"),
            Error::QuadratureDidNotConverge { estimate, abs_error } => write!(
                f,
                "quadrature did not converge (estimate {estimate:e}, error {abs_error:e})"
            ),
            Error::AccuracyInfeasible { requested, achievable } => write!(
                f,
                "requested accuracy {requested:e} infeasible; best achievable {achievable:e}"
            ),
            Error::Calibration(msg) => write!(f, "calibration failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
