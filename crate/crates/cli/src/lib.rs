//! Experiment runner: configuration, output layout and the per-kind drivers.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, GlobalOverrides, Kind};
pub use error::{CliError, Result};
pub use output::{RunManifest, Status};
pub use run::run_experiment;
