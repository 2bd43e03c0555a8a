use thiserror::Error;

/// Errors raised across the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported symbol: {0}")]
    UnsupportedSymbol(String),

    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("laplace inversion failed: non-finite transform value at node {node}")]
    InversionFailure { node: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("path exhausted: level {level} exceeds path maximum {max}; resample with a larger horizon")]
    PathExhausted { level: f64, max: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("grid too small for exact quadrature: {0}")]
    ExactnessViolation(String),

    #[error("brownian step too small: time {t} needs degree {needed} above cap {cap}; compose substeps")]
    StepTooSmall { t: f64, needed: usize, cap: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line contract:
    /// 1 config, 2 numeric failure, 3 I/O, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) => 1,
            Error::Io(_) | Error::Csv(_) => 3,
            Error::Verification(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
