use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system dimensions: {0}")]
    InvalidDims(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no orthogonal layer packing exists for K={k}, J={j}, N={n}")]
    Infeasible { k: usize, j: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid signature matrix: {0}")]
    InvalidSignature(String),
    #[error("malformed codebook file (line {line}): {msg}")]
    Parse { line: usize, msg: String },
    #[error("enumeration too large: {0} joint hypotheses")]
    TooLarge(u128),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
