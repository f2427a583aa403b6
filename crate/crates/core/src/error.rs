use thiserror::Error;

/// Errors raised by the k-free lattice toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("prime table limit {limit} is below 2, the table would be empty")]
    EmptyPrimeTable { limit: u64 },

    #[error(
        "0 is divisible by every k-th power; callers must apply the zero convention explicitly"
    )]
    ZeroArgument,

    #[error("zeta({s}) diverges, exponent must be at least 2")]
    Divergent { s: u32 },

    #[error("moduli {a} and {b} are not coprime")]
    NonCoprime { a: u128, b: u128 },

    #[error("integer budget exceeded: {required_bits} bits required, {available_bits} available")]
    Budget {
        required_bits: u32,
        available_bits: u32,
    },

    #[error("window too large: {size} free sites exceeds the budget of {limit}")]
    WindowBudget { size: usize, limit: usize },

    #[error("basis is singular")]
    SingularBasis,

    #[error("lattice is not unimodular: |det| = {det}")]
    NotUnimodular { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("n = k = 1 is excluded: the 1-free points of Z are just the two points closest to 0")]
    TrivialCase,

    #[error("denominator {q} is not ({power})-free, the point carries no intensity")]
    NotInSpectrum { q: u64, power: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Whether the failure stems from a resource budget rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. } | Error::WindowBudget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
