use thiserror::Error;

/// Errors produced by model construction, filter building and the simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("correlation {rho} outside the positive semidefinite range [{min}, 1] for K={users}")]
    CorrelationOutOfRange { rho: f64, min: f64, users: usize },

    #[error("matrix is not positive definite; factorization failed")]
    NotPositiveDefinite,

    #[error("matrix is singular (smallest pivot {0:e})")]
    Singular(f64),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("stage {stage} exceeds the {limit}-stage step-size schedule")]
    StageOutOfRange { stage: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series does not converge (max eigenvalue {0})")]
    NonConvergent(f64),

    #[error("limit series did not reach tolerance within {0} stages")]
    MaxStagesExceeded(usize),

    #[error("weight schedule covers stages up to {covered}, stage {needed} required")]
    MissingWeights { needed: usize, covered: usize },

    #[error("no unique optimum weight: SINR denominator is degenerate")]
    DegenerateOptimum,

    #[error("expanded evaluation needs {0} terms, above the guard of 1e7")]
    CostGuard(f64),

    #[error("channel gain of user {0} is zero on every subcarrier")]
    SingularChannel(usize),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
