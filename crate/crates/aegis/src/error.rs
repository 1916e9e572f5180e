//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration document failed validation. The message names the field.
    #[error("invalid config: {0}")]
    Config(String),

    /// An operation was called outside its contract (bad preconditions).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A tool name was not present in the registry. Upstream this is an
    /// execution-failure signal, not a programming error.
    #[error("unknown tool: {0}")]
    UnknownTool(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Remote agent backend failed (transport or malformed reply).
    #[error("backend error: {0}")]
    Backend(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
