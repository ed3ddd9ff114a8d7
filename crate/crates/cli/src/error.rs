use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config value violates a precondition; `path` is the key path.
    #[error("invalid config at `{path}`: {msg}")]
    Validation { path: String, msg: String },

    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Numerical(String),

    #[error("Picard iteration diverged after {iterations} iterations (trace in {trace})")]
    Divergence { iterations: usize, trace: PathBuf },
}

impl CliError {
    pub fn validation(path: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Validation {
            path: path.to_string(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::Parse(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Divergence { .. } => 4,
        }
    }
}

impl From<slabguide::Error> for CliError {
    fn from(e: slabguide::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
