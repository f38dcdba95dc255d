use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bit width {0} outside 1..={max}", max = crate::space::MAX_BITS)]
    BitWidth(u32),

    #[error("domain mismatch: expected {expected} bits, found {found}")]
    DomainMismatch { expected: u32, found: u32 },

    #[error("table length {found} does not match domain size {expected}")]
    TableLength { expected: usize, found: usize },

    #[error("value {value} at point {point} lies outside [{lo}, {hi}]")]
    OutOfRange {
        point: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("function is not Boolean-valued at point {0}")]
    NotBoolean(usize),

    #[error("zero residual: the hypothesis already equals the target")]
    ZeroResidual,

    #[error("measure has zero density")]
    ZeroDensity,

    #[error("empty concept class")]
    EmptyClass,

    #[error("concept class has {size} members, above the scan limit {limit}")]
    ClassTooLarge { size: u64, limit: u64 },

    #[error("concept class over {class} bits cannot act on a {domain}-bit domain")]
    ClassDomain { class: u32, domain: u32 },

    #[error("uniform marginal required")]
    NonUniform,

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("query budget exhausted after {0} queries")]
    QueryBudget(u64),

    #[error("round cap hit: {0}")]
    RoundCap(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
