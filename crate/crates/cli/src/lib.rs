//! Config-driven front end for the `jitdrift` detectors: synthetic data,
//! detection, baselines, scoring and ranking.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_baseline, cmd_detect, cmd_rank, cmd_score, cmd_synth};
pub use config::{DatasetConfig, RunConfig};
pub use error::{CliError, Result};
