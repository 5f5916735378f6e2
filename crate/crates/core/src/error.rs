use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scale mismatch: {0} vs {1}")]
    ScaleMismatch(String, String),
    #[error("family is empty")]
    EmptyFamily,
    #[error("level {level} out of range 0..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("input is not exactly uniform: {0}")]
    NotUniform(String),
    #[error("compute budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("postcondition failed: {0}")]
    Postcondition(String),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("retries exhausted after {attempts} attempts; failing checks: {failed}")]
    RetriesExhausted { attempts: u32, failed: String },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::InvalidParameter(msg.into()))
}
