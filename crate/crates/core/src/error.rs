/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input violated a precondition or invariant.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A numerical procedure failed (rank deficiency, divergence, underflow).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// File access failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// A file could not be parsed into the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
