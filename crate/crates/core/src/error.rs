use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is singular: pivot {pivot:e} in column {column}")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("operator maps sample {sample} to the zero vector; it is not full rank")]
    SingularDirection { sample: u64 },

    #[error("q assigns zero density to its own sample {sample}")]
    UnsupportedSample { sample: u64 },

    #[error("log-weight {0} is not finite")]
    NonFiniteWeight(f64),

    #[error("no samples accumulated")]
    EmptyAccumulator,

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
