use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// An upstream stage handed over data that breaks a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error for {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => exit::USAGE,
            Error::Parse { .. } | Error::Json(_) => exit::PARSE,
            Error::Integrity(_) | Error::Contract(_) => exit::INTEGRITY,
            Error::Config(_) | Error::Input(_) => exit::CONFIG,
            Error::Comparison(_) => exit::COMPARISON,
            Error::Io { .. } | Error::Image { .. } | Error::Codec(_) => exit::IO,
        }
    }
}

/// Exit codes used by the `detcons` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const INTEGRITY: i32 = 4;
    pub const PARTIAL_FAILURE: i32 = 5;
    pub const CONFIG: i32 = 6;
    pub const IO: i32 = 7;
    pub const COMPARISON: i32 = 8;
}
