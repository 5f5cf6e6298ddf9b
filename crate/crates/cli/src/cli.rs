//! Command-line flags. Every kind flag mirrors a config key of the same name
//! (dashes for underscores) and, when given, overrides the file value.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ExperimentConfig, GlobalOverrides, Kind};
use crate::error::{CliError, Result};
use crate::output::RunManifest;
use crate::run::run_experiment;

#[derive(Debug, Parser)]
#[command(name = "expressivity", version, about = "Expressivity experiments on random and trained piecewise-linear networks")]
pub struct Cli {
    /// TOML file with the experiment's keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: runs/<kind>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Allow writing into a non-empty output directory.
    #[arg(long, global = true)]
    pub overwrite: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trajectory length through random networks, per layer.
    TrajGrowth(GrowthFlags),
    /// Transitions against the length of the curve each layer receives.
    Transitions(TransitionsFlags),
    /// Activation-pattern regions on a 2-D window.
    Regions(PlaneFlags),
    /// Neuron level-set polylines on a 2-D window.
    Boundaries(PlaneFlags),
    /// Distinct sign labelings of a fixed input set.
    Dichotomies(DichotomiesFlags),
    /// Train a classifier and probe trajectory lengths at checkpoints.
    TrainTraj(TrainFlags),
    /// Train exactly one layer at a time from a shared initialization.
    TrainFreeze(TrainFlags),
    /// Re-emit plot-ready series from an earlier run directory.
    PlotData(PlotFlags),
}

impl Command {
    pub fn kind(&self) -> Kind {
        match self {
            Command::TrajGrowth(_) => Kind::TrajGrowth,
            Command::Transitions(_) => Kind::Transitions,
            Command::Regions(_) => Kind::Regions,
            Command::Boundaries(_) => Kind::Boundaries,
            Command::Dichotomies(_) => Kind::Dichotomies,
            Command::TrainTraj(_) => Kind::TrainTraj,
            Command::TrainFreeze(_) => Kind::TrainFreeze,
            Command::PlotData(_) => Kind::PlotData,
        }
    }

    /// The flags that were given, as a config table.
    pub fn flag_table(&self) -> Result<toml::Table> {
        let value = match self {
            Command::TrajGrowth(f) => toml::Value::try_from(f),
            Command::Transitions(f) => toml::Value::try_from(f),
            Command::Regions(f) | Command::Boundaries(f) => toml::Value::try_from(f),
            Command::Dichotomies(f) => toml::Value::try_from(f),
            Command::TrainTraj(f) | Command::TrainFreeze(f) => toml::Value::try_from(f),
            Command::PlotData(f) => toml::Value::try_from(f),
        }
        .map_err(|e| CliError::config(format!("flags: {e}")))?;
        match value {
            toml::Value::Table(t) => Ok(t),
            _ => Ok(toml::Table::new()),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct RefineFlags {
    #[arg(long = "refine-initial-samples")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_samples: Option<usize>,
    #[arg(long = "refine-rel-tol")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long = "refine-max-samples")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
    /// uniform | adaptive
    #[arg(long = "refine-strategy")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GrowthFlags {
    /// Widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[arg(long = "sigma-w2", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<Vec<f64>>,
    #[arg(long = "sigma-b2", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    /// hardtanh | relu
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_output: Option<bool>,
    #[command(flatten)]
    pub refine: RefineFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TransitionsFlags {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[arg(long = "sigma-w2", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<Vec<f64>>,
    #[arg(long = "sigma-b2", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    /// sign | region
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[command(flatten)]
    pub refine: RefineFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PlaneFlags {
    /// Network file to load instead of sampling.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[arg(long = "sigma-w2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<f64>,
    #[arg(long = "sigma-b2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// lo,hi
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_range: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_range: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up_to_layer: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct DichotomiesFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[arg(long = "sigma-w2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<f64>,
    #[arg(long = "sigma-b2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub all_weights: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainFlags {
    /// mnist | cifar10
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    #[arg(long = "sigma-w2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<f64>,
    #[arg(long = "sigma-b2")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_subset: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_readout: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_layers: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    #[command(flatten)]
    pub refine: RefineFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct PlotFlags {
    /// Run directory to read.
    #[arg(long = "in")]
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
}

/// Resolves the configuration for `cli` without running anything.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig> {
    let global = GlobalOverrides {
        seed: cli.seed,
        out: cli.out.clone(),
        threads: cli.threads,
        overwrite: cli.overwrite,
    };
    let file = match &cli.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?),
        None => None,
    };
    ExperimentConfig::resolve(cli.command.kind(), file.as_deref(), cli.command.flag_table()?, &global)
}

pub fn execute(cli: &Cli) -> Result<RunManifest> {
    run_experiment(&resolve(cli)?)
}
