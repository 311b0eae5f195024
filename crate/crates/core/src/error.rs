use alloc::string::String;

use crate::subset::Subset;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("field order {0} is not prime")]
    NotPrime(u64),
    #[error("field order {q} must exceed the demand size {d}")]
    FieldTooSmall { q: u64, d: usize },
    #[error("D = {d} does not divide K = {k}")]
    NotDivisible { k: usize, d: usize },
    #[error("invalid demand set: {0}")]
    InvalidDemand(String),
    #[error("row index out of range: {0}")]
    InvalidRow(String),
    #[error("probability P[{i},{j}] = {value} lies outside [0, 1]")]
    ProbabilityOutOfRange { i: usize, j: usize, value: String },
    #[error("no {j}-subset collection of the demand set is evenly distributed under cyclic shifts (D = {d})")]
    NoEvenCollection { d: usize, j: usize },
    #[error("inverse of zero")]
    ZeroInverse,
    #[error("singular matrix")]
    Singular,
    #[error("failed to draw full-rank demand coefficients after {attempts} attempts (supports {supports:?})")]
    RankExhausted { attempts: usize, supports: alloc::vec::Vec<Subset> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
