use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped so that a front end can map them onto distinct exit
/// statuses: input invariants, purification mismatches and protocol
/// bookkeeping each have their own family.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("total dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("state is not normalized: deviation {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("matrix is not Hermitian: max deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("negative probability {value:e} at flat index {index}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("empty remainder: cannot trace out every party")]
    EmptyRemainder,

    #[error("invalid party split: {0}")]
    InvalidSplit(String),

    #[error("parameter out of range: {name} = {value}")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("not locally connected: left marginals differ by {residual:e}")]
    NotLocallyConnected { residual: f64 },

    #[error("not a purification: residual {residual:e}")]
    NotPurification { residual: f64 },

    #[error("unnormalized matrix: Frobenius norm {norm}")]
    Unnormalized { norm: f64 },

    #[error("protocol violation at step {step}: {reason}")]
    Protocol { step: usize, reason: String },

    #[error("invalid interval: lower {lower} exceeds upper {upper}")]
    InvalidInterval { lower: String, upper: String },

    #[error("search too large: {0}")]
    SearchTooLarge(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
