use std::path::PathBuf;

use thiserror::Error;

use crate::lattice::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("restriction target is not a subset of the support (cell {0:?} missing)")]
    NotASubset(Cell),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("symbol {symbol} out of range for alphabet of size {alphabet_size}")]
    SymbolOutOfRange { symbol: u8, alphabet_size: u8 },

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("declared symmetry `{flag}` does not hold: {detail}")]
    SymmetryViolation { flag: String, detail: String },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative variable value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("numerical failure in simplex: {0}")]
    Numerical(String),

    #[error("explicit storage budget exceeded: {count} vertices (limit {limit})")]
    BudgetExceeded { count: usize, limit: usize },

    #[error("malformed cache file {path}: {reason}")]
    BadCache { path: PathBuf, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
