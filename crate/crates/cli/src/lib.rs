//! Command-line front end: argument definitions, dispatch and exit statuses.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcorr_core::FitOptions;
use serde::Serialize;

pub mod commands;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const PURIFICATION: i32 = 3;
    pub const PROTOCOL: i32 = 4;
    pub const FIDELITY: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "qcorr", version, about = "Correlation and communication complexity of multipartite states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Marginal complexity, qcorr and qcomm of a pure state.
    AnalyzePure(PureArgs),
    /// PSD-rank and qcorr bounds of a classical distribution.
    AnalyzeDist(DistArgs),
    /// Purification-based bounds for a density operator.
    AnalyzeMixed(MixedArgs),
    /// Replay a generation protocol and check it reaches its target.
    Verify(VerifyArgs),
    /// Build a witness (seed protocol, preparer protocol, truncation, purification).
    Synthesize(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Approximation parameter, in (0, 1).
    #[arg(long)]
    pub eps: Option<f64>,
    /// JSON report path; witnesses are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, default_value_t = FitOptions::default().restarts)]
    pub restarts: usize,
    #[arg(long, default_value_t = FitOptions::default().max_iters)]
    pub iters: usize,
    /// RNG seed of the fit.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Residual at which a fitted factorization counts as exact.
    #[arg(long, default_value_t = FitOptions::default().residual_target)]
    pub tol: f64,
}

impl FitArgs {
    pub fn options(&self) -> FitOptions {
        FitOptions { restarts: self.restarts, max_iters: self.iters, seed: self.seed, residual_target: self.tol, ..FitOptions::default() }
    }
}

impl Default for FitArgs {
    fn default() -> Self {
        let o = FitOptions::default();
        Self { restarts: o.restarts, iters: o.max_iters, seed: o.seed, tol: o.residual_target }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PureArgs {
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Exhaustive product-cover search instead of greedy.
    #[arg(long)]
    pub brute_cover: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DistArgs {
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixedArgs {
    pub input: PathBuf,
    /// Candidate purification (repeatable). A `pure` file, optionally with `owners`.
    #[arg(long = "candidate")]
    pub candidates: Vec<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    pub protocol: PathBuf,
    /// Replaces the protocol's declared target.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Required fidelity is 1 − eps.
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Witness {
    /// Canonical seed with local isometries (pure state input).
    Seed,
    /// One party prepares the seed and sends the shares (pure state input).
    Preparer,
    /// Spectral truncation at `--eps` (pure state input).
    Truncation,
    /// Purification built from a PSD factorization (factorization input).
    Purification,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub witness: Witness,
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// Maps an error onto an exit status.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use qcorr_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::NotPurification { .. }) => exit::PURIFICATION,
        Some(E::Protocol { .. }) => exit::PROTOCOL,
        Some(_) => exit::INPUT,
        None if err.downcast_ref::<std::io::Error>().is_some() => exit::INPUT,
        None => exit::INTERNAL,
    }
}
