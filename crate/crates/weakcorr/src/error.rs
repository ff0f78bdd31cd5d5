use thiserror::Error;

/// Errors produced by the library and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical consistency error: {0}")]
    Numerics(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code: 1 for usage/config/input problems,
    /// 2 for numerical invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerics(_) | Error::Invariant(_) => 2,
            _ => 1,
        }
    }
}
