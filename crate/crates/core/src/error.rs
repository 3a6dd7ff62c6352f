use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("community index {index} out of range for {count} communities")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// An exhaustive oracle refused to run because the search space is too large.
    #[error("size guard exceeded: {what} needs {required} states, limit is {limit}")]
    SizeGuard {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("estimator variant mismatch: state is {state}, update expects {expected}")]
    VariantMismatch {
        state: &'static str,
        expected: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
