use std::path::PathBuf;

use thiserror::Error;

/// Failure of a subcommand, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A cross-check ran to completion and found a violation.
    #[error("{0}")]
    CheckFailed(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Internal(_) => 70,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl From<batchorder::ModelError> for CliError {
    fn from(e: batchorder::ModelError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<batchorder::SimError> for CliError {
    fn from(e: batchorder::SimError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<batchorder::OracleError> for CliError {
    fn from(e: batchorder::OracleError) -> Self {
        match e {
            batchorder::OracleError::Sim(e) => e.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<batchorder::WorkloadError> for CliError {
    fn from(e: batchorder::WorkloadError) -> Self {
        match e {
            batchorder::WorkloadError::Sim(e) => e.into(),
            other => CliError::Invalid(other.to_string()),
        }
    }
}
