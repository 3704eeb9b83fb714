//! Correlation and communication complexity of multipartite quantum states
//! and classical distributions.
//!
//! The crate computes exact values where a closed characterization exists
//! (marginal complexity of pure states, approximate Schmidt ranks), bound
//! intervals elsewhere, and the constructive witnesses behind every upper
//! bound: seed states with local isometries, purifications built from PSD
//! factorizations, spectral truncations and generation protocols that a
//! small simulator replays and checks.
//!
//! Module map:
//! - [`states`]: pure states, density operators, distributions, partial trace, fidelity.
//! - [`spectral`]: eigen/Schmidt decompositions, approximate ranks, Uhlmann partners.
//! - [`psd_rank`]: PSD factorizations of nonnegative tensors and rank bounds.
//! - [`complexity`]: complexity measures and certified intervals.
//! - [`synthesis`]: witnesses and the protocol simulator.
//! - [`io`]: JSON file formats.

// `!(x > 0.0)` is how NaN gets rejected along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexity;
pub mod error;
pub mod io;
pub mod psd_rank;
pub mod sample;
pub mod spectral;
pub mod states;
pub mod synthesis;
pub mod tensor;
pub mod tol;

pub use num_complex::Complex64 as C64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

pub use complexity::{ComplexityReport, Rational};
pub use error::{Error, Result};
pub use psd_rank::{FitOptions, PsdFactorization};

pub use spectral::{SchmidtDecomposition, SupportDecomposition};
pub use states::{ClassicalDistribution, DensityOperator, PartySplit, PureState};
pub use synthesis::{GenerationProtocol, LocalIsometry, Purification};

