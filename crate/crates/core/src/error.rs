//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit string length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: u32, got: u32 },

    #[error("output longer than input: |y| = {output} > |x| = {input}")]
    OutputLongerThanInput { input: u32, output: u32 },

    #[error("channel parameters out of range: {0}")]
    InvalidChannel(String),

    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),

    #[error("transition matrix is not row-stochastic (row {row} sums to {sum})")]
    NotRowStochastic { row: usize, sum: f64 },

    #[error(
        "memory budget exceeded: {what} needs about {needed_bytes} bytes, budget is {budget_bytes}"
    )]
    MemoryBudget {
        what: &'static str,
        needed_bytes: u64,
        budget_bytes: u64,
    },

    #[error("capacity table is missing entry ({n}, {k})")]
    MissingEntry { n: u32, k: u32 },

    #[error("capacity table row n = {n} is incomplete; missing k: {missing:?}")]
    IncompleteRow { n: u32, missing: Vec<u32> },

    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    #[error("cache file invalid: {0}")]
    CacheFile(String),

    #[error("cache does not cover the requested lengths (n = {n}, k = {k})")]
    CacheCoverage { n: u32, k: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
