use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma must lie strictly inside (0, 1), got {0}")]
    InvalidGamma(String),
    #[error("invalid occupancy vector: {0}")]
    InvalidOccupancy(String),
    #[error("type count must be at least 1")]
    InvalidTypeCount,
    #[error("state has {blocks} blocks but the model allows at most {types} types")]
    BlockCountExceedsTypes { blocks: usize, types: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration budget exceeded: requested {requested}, cap {cap}")]
    BudgetExceeded { requested: usize, cap: usize },
    #[error("conditional undefined: {0}")]
    UndefinedConditional(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
