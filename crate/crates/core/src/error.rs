use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum LrvError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("correlation triple ({0}, {1}, {2}) is outside the admissible region")]
    RegionViolation(f64, f64, f64),

    #[error("rejection sampling gave up after {0} draws; the correlation region looks empty")]
    RejectionCap(usize),

    #[error("sobol dimension {0} exceeds the direction-number table (max {1})")]
    SobolDimension(usize, usize),

    #[error("argument {0} is outside the open unit interval")]
    OutsideUnitInterval(f64),

    #[error("parameter layout mismatch: network expects {expected} scalars, theta has {got}")]
    LayoutMismatch { expected: usize, got: usize },

    #[error("invalid proposal: {0}")]
    InvalidProposal(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("non-finite gradient entry at coordinate {0}")]
    NonFiniteGradient(usize),

    #[error("training diverged: loss is not finite at step {0}")]
    NonFiniteLoss(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, LrvError>;
