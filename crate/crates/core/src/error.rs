use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain mismatch: {0} vs {1}")]
    DomainMismatch(String, String),
    #[error("no primitive root of unity of order {order} available: {reason}")]
    NoSuchRoot { order: u64, reason: String },
    #[error("no suitable root of unity: {0}")]
    NoSuitableRoot(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("algorithm carries no matmul shape")]
    ShapeUnknown,
    #[error("not divisible: {0}")]
    NotDivisible(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("invalid zero-out witness: {0}")]
    WitnessInvalid(String),
    #[error("recursion depth k={k} is below the {needed} bootstrap levels required")]
    KTooSmall { k: u32, needed: u32 },
    #[error("singular interpolation system (repeated points)")]
    SingularSystem,
    #[error("specialization point must be nonzero")]
    ZeroPoint,
    #[error("exhaustive search limited to modulus <= {limit}, got {modulus}")]
    TooLargeForExhaustive { modulus: u64, limit: u64 },
    #[error("integer rounding infeasible: {0}")]
    InfeasibleRounding(String),
    #[error("instance too large to materialise: {0}")]
    TooLarge(String),
    #[error("hash modulus must be odd, got {0}")]
    EvenModulus(u64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
