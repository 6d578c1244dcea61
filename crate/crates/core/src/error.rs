use thiserror::Error;

/// Errors raised by the pricing primitives, model classes, learners and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("context is not a unit vector (norm {norm})")]
    NotUnitContext { norm: f64 },

    #[error("projected valuation {value} lies outside [0, 1]")]
    ValuationOutOfRange { value: f64 },

    #[error("price {0} lies outside [0, 1]")]
    PriceOutOfRange(f64),

    #[error("price {price} is not on the grid of step {step}")]
    OffGrid { price: f64, step: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cover would need {required} models but the cap is {cap}")]
    CoverTooLarge { required: u128, cap: usize },

    #[error("posterior weights are degenerate")]
    DegenerateWeights,

    #[error("price {0} is not an active arm")]
    InactiveArm(f64),

    #[error("scripted context list exhausted at round {0}")]
    ContextsExhausted(u64),

    #[error("invariant violated at round {round}: {what}")]
    InvariantViolated { round: u64, what: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<std::io::Error> for PricingError {
    fn from(e: std::io::Error) -> Self {
        PricingError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for PricingError {
    fn from(e: serde_json::Error) -> Self {
        PricingError::Serde(e.to_string())
    }
}

pub type Result<T, E = PricingError> = std::result::Result<T, E>;
