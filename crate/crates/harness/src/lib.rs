//! Monte Carlo experiments, achievable-rate evaluation and the command-line front end
//! for the `sparsepat` library.
//!
//! Every experiment is a pure function of an [`ExperimentConfig`]: trials draw from
//! their own random streams (see [`rng`]), so output is identical for any worker count.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;
pub mod rate;
pub mod rng;
pub mod stats;

pub use cli::cli_main;
pub use config::{Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use output::{write_csv, ResultRow, CSV_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] sparsepat::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
