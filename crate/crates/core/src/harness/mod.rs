//! Experiment plumbing behind the `saer` command line.

pub mod check;
pub mod config;
pub mod experiment;
pub mod output;
pub mod summary;

use std::io;

use thiserror::Error;

use crate::graph::{GraphError, ParseError};
use crate::protocol::ProtocolError;
use crate::theory::TheoryError;

pub use check::{evaluate, CheckInput, Status, Verdict};
pub use config::{parse_config, CSetting, ExperimentConfig, GraphSpec, QuotaPolicy};
pub use experiment::{run_experiment, run_trial, ExperimentOutput, Resolved};
pub use summary::{AggregateSummary, Stat, SummaryAccumulator, TrialStats};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SAER_OUTPUT_DIR";

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const NON_TERMINATION: u8 = 4;
    pub const CHECK_FAILED: u8 = 5;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Io(_) => exit::IO,
            HarnessError::Parse(ParseError::Io(_)) => exit::IO,
            HarnessError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => exit::IO,
            HarnessError::Json(e) if e.is_io() => exit::IO,
            _ => exit::USAGE,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
