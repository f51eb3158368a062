use thiserror::Error;

/// Errors produced by the decorrelation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate in row {row}")]
    NonFiniteCoordinate { row: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("leading feature column must be the all-ones intercept (row {row} has {value})")]
    MissingIntercept { row: usize, value: f64 },

    #[error("correlation block for observation {index} is singular (duplicate locations with zero nugget?)")]
    SingularCorrelation { index: usize },

    #[error("matrix is not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("{n} points exceed the dense sampler cap of {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("learner has not been fitted")]
    Unfitted,

    #[error("invalid data at row {row}, column {column}: {message}")]
    Data {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported artifact version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCorrelation { .. } | Error::NotPositiveDefinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
