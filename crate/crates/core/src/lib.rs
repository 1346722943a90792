//! Sampling and scheduling for remote estimation of multiple Gauss-Markov
//! sources over parallel channels with i.i.d. random transmission times.
//!
//! The crate is layered bottom-up:
//!
//! - [`special`]: `erf`/`erfi`, the `Q`/`K` ratios and their inverses,
//!   `₂F₂(1,1;3/2,2;·)`, and the exit-time functions `R1`, `R2`, `R3`.
//! - [`stochastic`]: exact transitions of the three θ regimes, transmission
//!   models, hitting-time Monte Carlo.
//! - [`estimator`]: the MMSE estimator, per-source error/age bookkeeping and
//!   the age penalty.
//! - [`singlesource`]: optimal threshold and the β fixed point of a single
//!   bandit with activation cost λ, in signal-aware and age-based form.
//! - [`whittle`]: Whittle indices and their tabulation.
//! - [`simkit`]: the multi-source, multi-channel scheduling simulator.
//! - [`experiment`]: configuration files, sweeps, CSV output and self-checks.

pub mod estimator;
pub mod experiment;
pub mod simkit;
pub mod singlesource;
pub mod special;
pub mod stochastic;
pub mod whittle;

use thiserror::Error;

pub use special::SpecialError;
pub use stochastic::{RngStream, SourceParams, TransmissionModel};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("step budget exhausted after {steps} steps")]
    Timeout { steps: u64 },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("index table: {0}")]
    Table(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
