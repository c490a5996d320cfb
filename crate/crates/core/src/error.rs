use thiserror::Error;

/// Everything that can go wrong while building or rebalancing a database.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A sender tried to broadcast data it does not hold.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// An addressed receiver could not cancel the other operands of a coded broadcast.
    #[error("decode failure: {0}")]
    Decode(String),

    /// A holder of a target segment is missing one of its parts.
    #[error("merge failure: {0}")]
    Merge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn params<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Params(msg.into()))
}
