use thiserror::Error;

use crate::exact::Rational;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{a} and {m} are not coprime")]
    NotCoprime { a: i128, m: i128 },
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(i128),
    #[error("could not parse number `{0}`: {1}")]
    Parse(String, String),
    #[error("value {0} is not a triadic rational (denominator must be a power of 3)")]
    NonTriadic(String),
    #[error("bounds [{0}, {1}] are not both triadic rationals")]
    NonTriadicBounds(String, String),
    #[error("time {0} is outside [0, 1]")]
    TimeOutOfRange(String),
    #[error("block index {j} out of range at depth {m}")]
    IndexOutOfRange { m: u32, j: u128 },
    #[error("depth {depth} exceeds cap {cap}")]
    DepthTooLarge { depth: u32, cap: u32 },
    #[error("expected a positive value, got {0}")]
    NotPositive(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} has a numerator or denominator divisible by 3")]
    DivisibleByThree(String),
    #[error("n = {n} is outside the admissible set (p/3^n must be at most 1/3)")]
    OutOfM { n: i64 },
    #[error("no convergence at depth cap; last bracket [{lo}, {hi}]")]
    NoConvergence { lo: Box<Rational>, hi: Box<Rational> },
    #[error("parameters too large for the integer fast path: {0}")]
    Overflow(String),
}
