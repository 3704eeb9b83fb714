//! Numerical tolerances shared across the crate.

/// Accepted deviation of a state norm or trace from 1 before renormalizing.
pub const NORM: f64 = 1e-8;

/// Max entrywise deviation of `M - M†` accepted for density operators and factors.
pub const HERMITIAN: f64 = 1e-10;

/// Most negative eigenvalue clipped to zero instead of rejected.
pub const PSD: f64 = 1e-10;

/// Sum tolerance reported for classical distributions after renormalization.
pub const DIST_SUM: f64 = 1e-10;

/// Relative rank cutoff: values below `RANK * largest` count as zero.
pub const RANK: f64 = 1e-10;

/// Slack on cumulative-mass cutoffs so that exact boundary cases are included.
pub const CUTOFF_SLACK: f64 = 1e-12;

/// Residual tolerance for reconstruction and purification checks.
pub const RECON: f64 = 1e-8;

/// Largest total Hilbert-space dimension accepted by default.
pub const MAX_DIM: usize = 4096;

/// Renormalization is flagged only when the deviation is above rounding noise.
pub(crate) const RENORM_FLAG: f64 = 1e-12;
