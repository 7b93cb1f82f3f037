//! Experiment runner for the delayed BSVIE solver.
//!
//! Every subcommand reads an [`ExperimentConfig`], writes its artifacts plus a
//! `manifest.json` into the output directory, and returns an [`Outcome`] whose
//! `code` is the process exit status (see [`exit`]).

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{
    run_classify, run_contraction, run_convergence, run_oracle_compare, run_regularity, run_solve, ClassifyArgs,
    ContractionArgs, Example,
};
pub use config::{ExperimentConfig, Format};

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const REFUSED: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
    pub const ORACLE_MISMATCH: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(bsvie_core::Error),
}

impl From<bsvie_core::Error> for CliError {
    fn from(e: bsvie_core::Error) -> Self {
        match e {
            bsvie_core::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Core(bsvie_core::Error::Refused(_)) => exit::REFUSED,
            CliError::Io(_) | CliError::Core(_) => exit::FAILURE,
        }
    }
}

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub override_contraction: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub summary: serde_json::Value,
    pub artifacts: Vec<PathBuf>,
}
