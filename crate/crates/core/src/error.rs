use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input mean {mean:e} is not zero; H^-1 quantities are undefined")]
    MeanNotZero { mean: f64 },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: {0}")]
    Breakdown(String),

    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("stability conditions violated: {0}")]
    StabilityViolated(String),

    #[error("invariant violated at step {step}: {message}")]
    Invariant { step: usize, message: String },

    #[error("step {step}: non-finite solution ({detail})")]
    NonFiniteSolution { step: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), reason: reason.into() }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. }
            | Error::InvalidParameter { .. }
            | Error::Expression { .. }
            | Error::InvalidGrid(_)
            | Error::StabilityViolated(_) => 2,
            Error::NotConverged { .. }
            | Error::Breakdown(_)
            | Error::Singular(_)
            | Error::NonFiniteSolution { .. } => 3,
            Error::Invariant { .. } | Error::MeanNotZero { .. } => 4,
            Error::GridMismatch(_)
            | Error::NonFinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io(_) => 1,
        }
    }
}
