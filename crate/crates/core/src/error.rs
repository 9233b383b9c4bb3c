use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown instance id `{id}`: valid ids are U1..U18 and M1..M18")]
    UnknownInstance { id: String },

    #[error("invalid dimension q = {0}, must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("shift direction must be nonzero")]
    ZeroDirection,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "run length exceeded the cap of {cap} samples; check the control limit and shift size"
    )]
    RunLengthCap { cap: u64 },

    #[error("type-II error probability beta = 1 makes the cost formula undefined")]
    DivisionDomain,

    #[error("malformed instance file: {0}")]
    Format(String),

    #[error(
        "instance `{id}`: stored delta {stored} disagrees with computed non-centrality {computed}"
    )]
    DeltaMismatch {
        id: String,
        stored: f64,
        computed: f64,
    },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
