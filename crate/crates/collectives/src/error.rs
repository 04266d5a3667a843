//! Communication-layer errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CommError {
    #[error("io error talking to {peer}: {source}")]
    Io {
        peer: String,
        #[source]
        source: std::io::Error,
    },
    #[error("timed out after {millis} ms waiting for {peer}")]
    Timeout { peer: String, millis: u64 },
    #[error("peer {peer} disconnected")]
    Disconnected { peer: String },
    #[error("protocol violation from {peer}: {msg}")]
    Protocol { peer: String, msg: String },
    #[error("invalid communicator setup: {0}")]
    Setup(String),
}

pub type Result<T> = std::result::Result<T, CommError>;
