use thiserror::Error;
use tubelab::LabError;

/// Failures that stop a run before a verdict is reached.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Lab(#[from] LabError),
}

impl CliError {
    /// Exit code under the contract: 1 check failed, 2 invalid input, 3 budget exceeded.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Io { .. } => 2,
            CliError::Lab(LabError::BudgetExceeded(_)) => 3,
            CliError::Lab(
                LabError::Hypothesis(_)
                | LabError::NotUniform(_)
                | LabError::Postcondition(_)
                | LabError::RetriesExhausted { .. },
            ) => 1,
            CliError::Lab(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}
