use thiserror::Error;

/// Errors surfaced by the public operations of this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// The key `2^64 - 1` is reserved for the head/tail sentinels.
    #[error("key {0:#x} is reserved for sentinels")]
    KeyReserved(u64),
    /// The payload equals the queue's EMPTY marker.
    #[error("value {0:#x} is reserved as the queue EMPTY marker")]
    ValueReserved(u64),
    /// Arguments outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The arena could not obtain a new block.
    #[error("allocation failure: {0}")]
    AllocFailure(String),
    /// A history too large for exhaustive linearizability checking.
    #[error("history of {ops} operations exceeds the exhaustive bound of {max}")]
    Size { ops: usize, max: usize },
    /// A watchdog expired before a run completed.
    #[error("timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
