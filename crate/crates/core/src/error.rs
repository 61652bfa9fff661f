use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integer overflow in exact arithmetic")]
    Overflow,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("configuration is empty")]
    EmptyConfig,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no legal action available")]
    DeadEnd,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checksum mismatch in {0}")]
    Checksum(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
