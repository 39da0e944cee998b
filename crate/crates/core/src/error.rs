use thiserror::Error;

/// Errors raised by the selection mechanisms, oracles and data loaders.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation has no implementation for the requested configuration.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Exhaustive enumeration was requested over too many subsets.
    #[error("refusing to enumerate C({d}, {k}) subsets (limit {limit})")]
    TooLarge { d: usize, k: usize, limit: u64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A self-check that must never fail did fail.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
