use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum EcoError {
    /// A configuration or parameter constraint was violated.
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad arguments to a numerical or statistical routine.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The habitat has no agents to seed a population from.
    #[error("unservable request at habitat {habitat}: empty agent pool")]
    Unservable { habitat: usize },

    /// A structural invariant of the habitat network does not hold.
    #[error("structural error: {0}")]
    Structural(String),

    /// Bad command-line usage (unknown figure id and similar).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl EcoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EcoError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 for configuration and usage
    /// problems, 2 for runtime and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            EcoError::Config(_) | EcoError::Usage(_) | EcoError::InvalidInput(_) => 1,
            EcoError::Unservable { .. } | EcoError::Structural(_) | EcoError::Io { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, EcoError>;
