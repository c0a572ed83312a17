use std::path::PathBuf;

use thiserror::Error;

/// Failures of the experiment runner, grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] sgnlab_core::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1: invalid input, 2: numerical failure, 3: IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(sgnlab_core::Error::Divergence { .. }) => 2,
            CliError::Core(_) | CliError::Config(_) => 1,
            CliError::Io { .. } => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
