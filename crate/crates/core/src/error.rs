use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CarolError>;

#[derive(Debug, Error)]
pub enum CarolError {
    /// Caller supplied something outside an operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// Input is well-formed but numerically degenerate (zero-norm vector, empty reply).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An external embedding or chat endpoint failed.
    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, message: String },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CarolError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        CarolError::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CarolError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CarolError::Config { .. } => 2,
            CarolError::Provider { .. } => 3,
            CarolError::Io { .. } => 4,
            CarolError::Input(_) | CarolError::Degenerate(_) | CarolError::Parse { .. } => 1,
        }
    }
}
