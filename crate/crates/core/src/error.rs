use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LavaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LavaError {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("config error: {0}")]
    Config(String),

    /// Structural problem in an input file (header, row lengths, magic bytes).
    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    /// Well-formed input carrying unusable values (NaN, Inf, empty).
    #[error("data error: {0}")]
    Data(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl LavaError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LavaError::Param(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        LavaError::Data(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LavaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        LavaError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command line front end: 1 for usage and
    /// parameter problems, 2 for anything wrong with the data or filesystem.
    pub fn exit_code(&self) -> i32 {
        match self {
            LavaError::Param(_) | LavaError::Config(_) => 1,
            _ => 2,
        }
    }
}
