use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("width must be odd ≥ 3 (got {0})")]
    InvalidWidth(usize),

    #[error("row count must be ≥ 1")]
    InvalidRows,

    #[error("capacity b^k overflows 64 bits (k={rows}, b={width})")]
    CapacityOverflow { rows: usize, width: usize },

    #[error("non-finite input {0}")]
    NonFinite(f64),

    #[error("sketch at capacity b^k = {0}")]
    AtCapacity(u64),

    #[error("no data")]
    Empty,

    #[error("not at capacity ({count} of {capacity}); use query")]
    NotAtCapacity { count: u64, capacity: u64 },

    #[error("invalid order-statistic indices: {0}")]
    InvalidIndices(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible joint probability: {0}")]
    Infeasible(String),

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("invalid distribution literal `{0}`")]
    ParseDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
