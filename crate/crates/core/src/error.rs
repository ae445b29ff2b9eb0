use thiserror::Error;

/// Errors raised across the library. Variants that "signal a bug" are
/// checked invariants of exact formulas and should never fire on valid input.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("field size {size} exceeds the configured maximum {max}")]
    FieldTooLarge { size: u128, max: u64 },
    #[error("division by zero in the field")]
    DivisionByZero,
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("skew shape is not a single box")]
    NotSingleBox,
    #[error("weight mismatch: expected {expected}, got {got}")]
    WeightMismatch { expected: usize, got: usize },
    #[error("non-integral result where an integer was required: {0}")]
    NonIntegerResult(String),
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: usize },
    #[error("odd part multiplicity in a doubled class invariant (factor {0})")]
    OddMultiplicity(String),
    #[error("the walk is trivial for n = 1: every transvection preserves the form")]
    TrivialWalk,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("internal error: {0}")]
    InternalError(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
