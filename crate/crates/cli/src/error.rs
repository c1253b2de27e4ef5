use std::fmt::Display;

use thiserror::Error;

/// Failure classes of the command line contract.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid inputs, detection failures.
    #[error("{0}")]
    Input(String),
    /// Anything else, including failures to write outputs.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

pub fn input(e: impl Display) -> CliError {
    CliError::Input(e.to_string())
}

pub fn internal(e: impl Display) -> CliError {
    CliError::Internal(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;
