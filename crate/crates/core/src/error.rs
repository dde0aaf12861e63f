use thiserror::Error;

/// Errors shared across the dense oracle, tensor formats, models and solver.
#[derive(Error, Debug)]
pub enum Error {
    #[error("state space has {states} entries, exceeding the dense cap of {cap}")]
    CapExceeded { states: u128, cap: u128 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("linear system is singular")]
    SingularSystem,

    #[error("matricization mode set must not be empty")]
    EmptyModeSet,

    #[error("dimension trees do not match: {0}")]
    TreeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("leaf order is not a permutation of 1..=d")]
    InvalidPermutation,

    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("gamma = {gamma} is below the observed diagonal bound {required}")]
    InvalidGamma { gamma: f64, required: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
