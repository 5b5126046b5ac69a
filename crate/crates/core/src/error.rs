use thiserror::Error;

/// Errors raised by the sampler, the move library and the post-processing
/// routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum RjError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model {model}: initial state has a non-finite log density")]
    Startup { model: usize },
    #[error("model index {0} is outside the model space")]
    UnknownModel(usize),
    #[error("no between-model move connects model {from} to model {to}")]
    NoMove { from: usize, to: usize },
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("proposal calibration failed: {0}")]
    Calibration(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),
    #[error("singular matrix: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, RjError>;

impl RjError {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        RjError::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }
}
