use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DbdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DbdError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("non-numeric value `{value}` in column `{column}` (data row {row})")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },

    #[error("zero usable rows")]
    NoUsableRows,

    #[error("column `{0}` is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateId(String),

    #[error("invalid population: {0}")]
    InvalidPopulation(String),

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("window start {start} outside 1..={len}")]
    StartOutOfRange { start: usize, len: usize },

    #[error("invalid swap positions {a} and {b} for a sequence of length {len}")]
    InvalidSwap { a: usize, b: usize, len: usize },

    #[error("distance cache covers {cache} units but the population has {population}")]
    CacheMismatch { cache: usize, population: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sample size {n} exceeds stratum `{label}` size {size}")]
    StratumTooSmall { label: i64, n: usize, size: usize },

    #[error("neighborhood size k = {k} must satisfy 2 <= k <= n = {n}")]
    InvalidNeighborhood { k: usize, n: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("unknown target `{0}`")]
    UnknownTarget(String),
}
