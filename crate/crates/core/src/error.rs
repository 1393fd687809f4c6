use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid contraction spec `{spec}`: {reason}")]
    ContractSpec { spec: String, reason: String },

    #[error("invalid weight spec: {0}")]
    InvalidSpec(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("index order violated: {0}")]
    IndexOrder(String),

    #[error("missing psi matrix for key ({0},{1})")]
    MissingPsi(usize, usize),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("group element mismatch: {0}")]
    GroupMismatch(String),

    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
