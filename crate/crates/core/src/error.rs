use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time point ({0}, {1}): coordinates must be finite and nonnegative")]
    InvalidTimePoint(f64, f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("mesh has no atoms left after restriction to |t| >= {0}")]
    EmptyMesh(f64),

    #[error("pair is not ordered: {0}")]
    Unordered(String),

    #[error("kernel diverges at zero distance with zero truncation")]
    DivergentKernel,

    #[error("covariance matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
