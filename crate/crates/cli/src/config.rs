//! Experiment configuration: a TOML file, overridden key by key by flags.
//!
//! The file is one flat table per experiment. Keys shared by every kind are
//! `kind`, `seed`, `out` and `threads`; everything else belongs to the
//! kind's parameter table and unknown keys are rejected. Refinement settings
//! live in an optional `[refine]` sub-table.

use std::fmt;
use std::path::{Path, PathBuf};

use expressivity::measures::TransitionMode;
use expressivity::net::Activation;
use expressivity::traj::{RefinePolicy, RefineStrategy};
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TrajGrowth,
    Transitions,
    Regions,
    Boundaries,
    Dichotomies,
    TrainTraj,
    TrainFreeze,
    PlotData,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::TrajGrowth,
        Kind::Transitions,
        Kind::Regions,
        Kind::Boundaries,
        Kind::Dichotomies,
        Kind::TrainTraj,
        Kind::TrainFreeze,
        Kind::PlotData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::TrajGrowth => "traj-growth",
            Kind::Transitions => "transitions",
            Kind::Regions => "regions",
            Kind::Boundaries => "boundaries",
            Kind::Dichotomies => "dichotomies",
            Kind::TrainTraj => "train-traj",
            Kind::TrainFreeze => "train-freeze",
            Kind::PlotData => "plot-data",
        }
    }

    pub fn from_name(name: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts `key = 4` as well as `key = [4, 16]`.
fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: DeserializeOwned,
{
    match toml::Value::deserialize(d)? {
        toml::Value::Array(items) => items
            .into_iter()
            .map(|v| v.try_into().map_err(D::Error::custom))
            .collect(),
        v => Ok(vec![v.try_into().map_err(D::Error::custom)?]),
    }
}

fn one_or_many_opt<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: DeserializeOwned,
{
    one_or_many(d).map(Some)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    pub initial_samples: usize,
    pub rel_tol: f64,
    pub max_samples: usize,
    pub strategy: RefineStrategy,
}

impl Default for RefineParams {
    fn default() -> Self {
        let p = RefinePolicy::default();
        Self {
            initial_samples: p.initial_samples,
            rel_tol: p.rel_tol,
            max_samples: p.max_samples,
            strategy: p.strategy,
        }
    }
}

impl RefineParams {
    pub fn policy(&self) -> RefinePolicy {
        RefinePolicy {
            initial_samples: self.initial_samples,
            rel_tol: self.rel_tol,
            max_samples: self.max_samples,
            strategy: self.strategy,
        }
    }
}

fn d_sigma_b2_growth() -> Vec<f64> {
    vec![1.0]
}
fn d_replicas_growth() -> usize {
    50
}
fn d_input_dim() -> usize {
    32
}
fn d_hardtanh() -> Activation {
    Activation::HardTanh
}
fn d_relu() -> Activation {
    Activation::ReLU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    #[serde(deserialize_with = "one_or_many")]
    pub k: Vec<usize>,
    #[serde(deserialize_with = "one_or_many")]
    pub sigma_w2: Vec<f64>,
    #[serde(default = "d_sigma_b2_growth", deserialize_with = "one_or_many")]
    pub sigma_b2: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub depth: Vec<usize>,
    #[serde(default = "d_replicas_growth")]
    pub replicas: usize,
    #[serde(default = "d_input_dim")]
    pub input_dim: usize,
    #[serde(default = "d_hardtanh")]
    pub activation: Activation,
    #[serde(default)]
    pub include_output: bool,
    #[serde(default)]
    pub refine: RefineParams,
}

fn d_k_transitions() -> Vec<usize> {
    vec![8, 64]
}
fn d_sigma_w2_transitions() -> Vec<f64> {
    vec![2.0, 8.0]
}
fn d_depth_transitions() -> usize {
    10
}
fn d_replicas_transitions() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionsParams {
    #[serde(default = "d_k_transitions", deserialize_with = "one_or_many")]
    pub k: Vec<usize>,
    #[serde(default = "d_sigma_w2_transitions", deserialize_with = "one_or_many")]
    pub sigma_w2: Vec<f64>,
    #[serde(default = "d_sigma_b2_growth", deserialize_with = "one_or_many")]
    pub sigma_b2: Vec<f64>,
    #[serde(default = "d_depth_transitions")]
    pub depth: usize,
    #[serde(default = "d_replicas_transitions")]
    pub replicas: usize,
    #[serde(default = "d_input_dim")]
    pub input_dim: usize,
    #[serde(default = "d_hardtanh")]
    pub activation: Activation,
    #[serde(default)]
    pub mode: TransitionMode,
    #[serde(default)]
    pub refine: RefineParams,
}

fn d_two() -> usize {
    2
}
fn d_widths_plane() -> Vec<usize> {
    vec![8, 8, 8]
}
fn d_sigma_w2_plane() -> f64 {
    2.0
}
fn d_sigma_b2_plane() -> f64 {
    0.1
}
fn d_range() -> [f64; 2] {
    [-1.0, 1.0]
}
fn d_resolution() -> usize {
    512
}

/// Network and window for the 2-D measures (regions, boundaries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneParams {
    /// Load this network instead of sampling one.
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    #[serde(default = "d_two")]
    pub input_dim: usize,
    #[serde(default = "d_widths_plane", deserialize_with = "one_or_many")]
    pub widths: Vec<usize>,
    #[serde(default = "d_relu")]
    pub activation: Activation,
    #[serde(default = "d_sigma_w2_plane")]
    pub sigma_w2: f64,
    #[serde(default = "d_sigma_b2_plane")]
    pub sigma_b2: f64,
    #[serde(default = "d_resolution")]
    pub resolution: usize,
    #[serde(default = "d_range")]
    pub a_range: [f64; 2],
    #[serde(default = "d_range")]
    pub b_range: [f64; 2],
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    /// Boundaries only: deepest layer contoured (default: all).
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub up_to_layer: Option<usize>,
}

fn d_s() -> usize {
    8
}
fn d_depth_dich() -> usize {
    6
}
fn d_width_dich() -> usize {
    16
}
fn d_sigma_w2_dich() -> f64 {
    4.0
}
fn d_one_f() -> f64 {
    1.0
}
fn d_samples_dich() -> usize {
    10_000
}
fn d_true() -> bool {
    true
}
fn d_layers_dich() -> Vec<usize> {
    vec![1, 5]
}
fn d_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomiesParams {
    #[serde(default = "d_s")]
    pub s: usize,
    #[serde(default = "d_input_dim")]
    pub input_dim: usize,
    #[serde(default = "d_depth_dich")]
    pub depth: usize,
    #[serde(default = "d_width_dich")]
    pub width: usize,
    #[serde(default = "d_hardtanh")]
    pub activation: Activation,
    #[serde(default = "d_sigma_w2_dich")]
    pub sigma_w2: f64,
    #[serde(default = "d_one_f")]
    pub sigma_b2: f64,
    #[serde(default = "d_samples_dich")]
    pub samples: usize,
    /// Include the resample-everything sweep.
    #[serde(default = "d_true")]
    pub all_weights: bool,
    /// Hidden layers swept one at a time (1-based).
    #[serde(default = "d_layers_dich", deserialize_with = "one_or_many")]
    pub layers: Vec<usize>,
    /// Independent (input set, base network) draws; trial `t` uses seed `seed ^ t`.
    #[serde(default = "d_one")]
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    Cifar10,
}

fn d_mnist() -> DatasetName {
    DatasetName::Mnist
}
fn d_sigma_b2_train() -> f64 {
    0.01
}
fn d_width_train() -> usize {
    100
}
fn d_lr() -> f64 {
    0.05
}
fn d_batch() -> usize {
    64
}
fn d_steps() -> usize {
    3000
}
fn d_checkpoint_every() -> usize {
    300
}
fn d_subset() -> usize {
    10_000
}

/// Shared by `train-traj` and `train-freeze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    #[serde(default = "d_mnist")]
    pub dataset: DatasetName,
    /// Defaults to `$EXPRESSIVITY_DATA_DIR`, then `./data`.
    #[serde(default)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub sigma_w2: f64,
    #[serde(default = "d_sigma_b2_train")]
    pub sigma_b2: f64,
    #[serde(default = "d_depth_dich")]
    pub depth: usize,
    #[serde(default = "d_width_train")]
    pub width: usize,
    #[serde(default = "d_hardtanh")]
    pub activation: Activation,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_checkpoint_every")]
    pub checkpoint_every: usize,
    /// First `data_subset` training examples; 0 uses the whole set.
    #[serde(default = "d_subset")]
    pub data_subset: usize,
    #[serde(default)]
    pub zero_readout: bool,
    /// train-traj only: layers left trainable (1-based, `depth + 1` is the
    /// readout); all when absent.
    #[serde(default, deserialize_with = "one_or_many_opt")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_layers: Option<Vec<usize>>,
    /// train-freeze only: one run per listed layer; `1..=depth` when absent.
    #[serde(default, deserialize_with = "one_or_many_opt")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    #[serde(default)]
    pub refine: RefineParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotParams {
    /// Output directory of an earlier run.
    #[serde(rename = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Growth(GrowthParams),
    Transitions(TransitionsParams),
    Plane(PlaneParams),
    Dichotomies(DichotomiesParams),
    Train(TrainParams),
    Plot(PlotParams),
}

/// Values given on the command line for the shared keys.
#[derive(Debug, Clone, Default)]
pub struct GlobalOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub overwrite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub out: PathBuf,
    /// Parallelism hint; outputs never depend on it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub overwrite: bool,
    #[serde(flatten)]
    pub params: Params,
}

/// Recursively overlays `top` on `base`.
pub fn merge_tables(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge_tables(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn take_u64(table: &mut toml::Table, key: &str) -> Result<Option<u64>> {
    match table.remove(key) {
        None => Ok(None),
        Some(toml::Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
        Some(other) => Err(CliError::config(format!("`{key}` must be a non-negative integer, got {other}"))),
    }
}

fn params_from<T: DeserializeOwned>(kind: Kind, table: toml::Table) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("{kind}: {}", e.message().trim())))
}

fn require(cond: bool, field: &str, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::config(format!("`{field}` {msg}")))
    }
}

fn check_refine(r: &RefineParams) -> Result<()> {
    require(r.initial_samples >= 1, "refine.initial_samples", "must be >= 1")?;
    require(r.max_samples >= r.initial_samples, "refine.max_samples", "must be >= refine.initial_samples")?;
    require(r.rel_tol > 0.0, "refine.rel_tol", "must be > 0")
}

fn check_positive(xs: &[f64], field: &str) -> Result<()> {
    require(!xs.is_empty(), field, "must not be empty")?;
    require(xs.iter().all(|x| x.is_finite() && *x > 0.0), field, "entries must be > 0")
}

fn check_non_negative(xs: &[f64], field: &str) -> Result<()> {
    require(!xs.is_empty(), field, "must not be empty")?;
    require(xs.iter().all(|x| x.is_finite() && *x >= 0.0), field, "entries must be >= 0")
}

fn check_counts(xs: &[usize], field: &str) -> Result<()> {
    require(!xs.is_empty(), field, "must not be empty")?;
    require(xs.iter().all(|&x| x >= 1), field, "entries must be >= 1")
}

impl Params {
    fn parse(kind: Kind, table: toml::Table) -> Result<Params> {
        let params = match kind {
            Kind::TrajGrowth => Params::Growth(params_from(kind, table)?),
            Kind::Transitions => Params::Transitions(params_from(kind, table)?),
            Kind::Regions | Kind::Boundaries => Params::Plane(params_from(kind, table)?),
            Kind::Dichotomies => Params::Dichotomies(params_from(kind, table)?),
            Kind::TrainTraj | Kind::TrainFreeze => Params::Train(params_from(kind, table)?),
            Kind::PlotData => Params::Plot(params_from(kind, table)?),
        };
        params.validate(kind)?;
        Ok(params)
    }

    fn validate(&self, kind: Kind) -> Result<()> {
        match self {
            Params::Growth(p) => {
                check_counts(&p.k, "k")?;
                check_positive(&p.sigma_w2, "sigma_w2")?;
                check_non_negative(&p.sigma_b2, "sigma_b2")?;
                check_counts(&p.depth, "depth")?;
                require(p.replicas >= 1, "replicas", "must be >= 1")?;
                require(p.input_dim >= 1, "input_dim", "must be >= 1")?;
                check_refine(&p.refine)
            }
            Params::Transitions(p) => {
                check_counts(&p.k, "k")?;
                check_positive(&p.sigma_w2, "sigma_w2")?;
                check_non_negative(&p.sigma_b2, "sigma_b2")?;
                require(p.depth >= 1, "depth", "must be >= 1")?;
                require(p.replicas >= 1, "replicas", "must be >= 1")?;
                require(p.input_dim >= 1, "input_dim", "must be >= 1")?;
                check_refine(&p.refine)
            }
            Params::Plane(p) => {
                require(p.input_dim >= 2, "input_dim", "must be >= 2")?;
                check_counts(&p.widths, "widths")?;
                check_positive(&[p.sigma_w2], "sigma_w2")?;
                check_non_negative(&[p.sigma_b2], "sigma_b2")?;
                require(p.resolution >= 2, "resolution", "must be >= 2")?;
                require(
                    kind == Kind::Boundaries || p.up_to_layer.is_none(),
                    "up_to_layer",
                    "only applies to boundaries",
                )?;
                require(p.up_to_layer != Some(0), "up_to_layer", "must be >= 1")
            }
            Params::Dichotomies(p) => {
                require(p.s >= 1, "s", "must be >= 1")?;
                require(p.input_dim >= 1, "input_dim", "must be >= 1")?;
                require(p.depth >= 1, "depth", "must be >= 1")?;
                require(p.width >= 1, "width", "must be >= 1")?;
                check_positive(&[p.sigma_w2], "sigma_w2")?;
                check_non_negative(&[p.sigma_b2], "sigma_b2")?;
                require(p.samples >= 1, "samples", "must be >= 1")?;
                require(p.trials >= 1, "trials", "must be >= 1")?;
                require(p.all_weights || !p.layers.is_empty(), "layers", "must not be empty when all_weights = false")?;
                require(
                    p.layers.iter().all(|&l| (1..=p.depth).contains(&l)),
                    "layers",
                    &format!("entries must lie in 1..={}", p.depth),
                )
            }
            Params::Train(p) => {
                check_positive(&[p.sigma_w2], "sigma_w2")?;
                check_non_negative(&[p.sigma_b2], "sigma_b2")?;
                require(p.depth >= 1, "depth", "must be >= 1")?;
                require(p.width >= 1, "width", "must be >= 1")?;
                check_positive(&[p.learning_rate], "learning_rate")?;
                require(p.batch_size >= 1, "batch_size", "must be >= 1")?;
                require(p.steps >= 1, "steps", "must be >= 1")?;
                require(
                    (1..=p.steps).contains(&p.checkpoint_every),
                    "checkpoint_every",
                    "must lie in 1..=steps",
                )?;
                check_refine(&p.refine)?;
                let top = p.depth + 1;
                match kind {
                    Kind::TrainTraj => {
                        require(p.layers.is_none(), "layers", "belongs to train-freeze; use `train_layers`")?;
                        if let Some(l) = &p.train_layers {
                            require(!l.is_empty(), "train_layers", "must not be empty")?;
                            require(
                                l.iter().all(|&x| (1..=top).contains(&x)),
                                "train_layers",
                                &format!("entries must lie in 1..={top}"),
                            )?;
                        }
                    }
                    _ => {
                        require(p.train_layers.is_none(), "train_layers", "belongs to train-traj; use `layers`")?;
                        if let Some(l) = &p.layers {
                            require(!l.is_empty(), "layers", "must not be empty")?;
                            require(
                                l.iter().all(|&x| (1..=top).contains(&x)),
                                "layers",
                                &format!("entries must lie in 1..={top}"),
                            )?;
                        }
                    }
                }
                Ok(())
            }
            Params::Plot(_) => Ok(()),
        }
    }
}

impl ExperimentConfig {
    /// Builds the effective configuration: file table, then flag table on
    /// top, then the shared command-line overrides.
    pub fn resolve(kind: Kind, file: Option<&str>, flags: toml::Table, global: &GlobalOverrides) -> Result<Self> {
        let mut table: toml::Table = match file {
            Some(text) => text
                .parse()
                .map_err(|e: toml::de::Error| CliError::config(format!("config file: {}", e.message().trim())))?,
            None => toml::Table::new(),
        };
        merge_tables(&mut table, flags);

        match table.remove("kind") {
            None => {}
            Some(toml::Value::String(s)) if s == kind.name() => {}
            Some(other) => {
                return Err(CliError::config(format!(
                    "config `kind` = {other} conflicts with subcommand `{kind}`"
                )))
            }
        }
        let seed = take_u64(&mut table, "seed")?;
        let threads = take_u64(&mut table, "threads")?;
        let out = match table.remove("out") {
            None => None,
            Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => return Err(CliError::config(format!("`out` must be a path string, got {other}"))),
        };
        let params = Params::parse(kind, table)?;
        let threads = global.threads.or(threads.map(|t| t as usize));
        if threads == Some(0) {
            return Err(CliError::config("`threads` must be >= 1"));
        }
        Ok(Self {
            kind,
            seed: global.seed.or(seed).unwrap_or(0),
            out: global
                .out
                .clone()
                .or(out)
                .unwrap_or_else(|| Path::new("runs").join(kind.name())),
            threads,
            overwrite: global.overwrite,
            params,
        })
    }

    pub fn from_file(kind: Kind, path: &Path, global: &GlobalOverrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::resolve(kind, Some(&text), toml::Table::new(), global)
    }
}
