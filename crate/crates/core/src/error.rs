//! Error types used by `jscsi`.

use thiserror::Error;

/// `jscsi` `Result` type.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("negative or non-finite probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("row {row} sums to {sum}, expected 1")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("ragged matrix: row {row} has {len} entries, expected {expected}")]
    RaggedMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rate {rate} outside the domain of this exponent: {reason}")]
    RateOutOfDomain { rate: f64, reason: &'static str },
    #[error("grid too large: {points} points exceeds the budget of {budget}")]
    GridTooLarge { points: u128, budget: u128 },
    #[error("enumeration budget exceeded: {detail} needs {needed}, the limit is {budget}")]
    BudgetExceeded {
        needed: u128,
        budget: u128,
        detail: String,
    },
    #[error("channel has zero capacity")]
    ZeroCapacity,
    #[error("premise violated: {0}")]
    PremiseViolated(String),
}
