//! Library surface of the benchmark CLI, exposed so integration tests can
//! drive the pipeline without spawning the binary.

use std::fmt;

pub mod bench;
pub mod commands;
pub mod config;
pub mod pipeline;

/// Command-level errors, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or manifest: exit code 2.
    Invalid(String),
    /// Runtime failure: exit code 1.
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<trigphase::Error> for CliError {
    fn from(e: trigphase::Error) -> Self {
        match e {
            trigphase::Error::InvalidConfig(_) | trigphase::Error::Manifest(_) => {
                CliError::Invalid(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
