use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] trunctest_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("calibration manifest not found at {0} (run `trunctest calibrate` first)")]
    ManifestMissing(PathBuf),
    #[error("manifest has no entry for tester {0}")]
    ManifestEntry(&'static str),
    #[error("invalid sweep spec: {0}")]
    InvalidSpec(String),
    #[error("report needs at least one power curve")]
    EmptyReport,
    #[error("malformed results file: {0}")]
    Malformed(String),
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, BenchError>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T, BenchError> {
        self.map_err(|source| BenchError::Io { path: path.into(), source })
    }
}
