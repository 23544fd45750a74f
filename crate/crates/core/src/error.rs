use thiserror::Error;

/// Errors raised by the geometry, model, integrator and tableau layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spin {index} has zero norm")]
    ZeroSpin { index: usize },

    #[error("nonpositive separation {gap} across bond {bond}")]
    NonpositiveSeparation { bond: usize, gap: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("stage count mismatch: expected {expected}, found {found}")]
    StageMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
