//! train-traj and train-freeze over MNIST or CIFAR-10.
//!
//! Dataset layout under the data directory:
//! `mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte` and
//! `cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin`.

use std::path::PathBuf;

use expressivity::net::{Architecture, InitSpec};
use expressivity::par::Parallelism;
use expressivity::train::{
    load_cifar10_binary, load_mnist_idx, remaining_depth_experiment, train, Dataset, Split, TrainConfig, TrainRun,
};

use super::Report;
use crate::config::{DatasetName, TrainParams};
use crate::error::{CliError, Result};
use crate::output::{float, sha256_hex, OutDir, Status, Table};

pub const RUN_COLUMNS: [&str; 7] = ["step", "split", "accuracy", "loss", "layer", "probe", "length"];

/// `data_dir` from the config, else `$EXPRESSIVITY_DATA_DIR`, else `./data`.
pub fn data_dir(p: &TrainParams) -> PathBuf {
    p.data_dir
        .clone()
        .or_else(|| std::env::var_os("EXPRESSIVITY_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn existing(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::io(&path, std::io::Error::from(std::io::ErrorKind::NotFound)))
    }
}

fn load(p: &TrainParams) -> Result<(Dataset, Dataset)> {
    let root = data_dir(p);
    match p.dataset {
        DatasetName::Mnist => {
            let d = root.join("mnist");
            let f = |name: &str| existing(d.join(name));
            Ok((
                load_mnist_idx(f("train-images-idx3-ubyte")?, f("train-labels-idx1-ubyte")?, Split::Train)?,
                load_mnist_idx(f("t10k-images-idx3-ubyte")?, f("t10k-labels-idx1-ubyte")?, Split::Test)?,
            ))
        }
        DatasetName::Cifar10 => {
            let d = root.join("cifar-10-batches-bin");
            let train_files = (1..=5)
                .map(|i| existing(d.join(format!("data_batch_{i}.bin"))))
                .collect::<Result<Vec<_>>>()?;
            let test_file = existing(d.join("test_batch.bin"))?;
            Ok((
                load_cifar10_binary(&train_files, Split::Train)?,
                load_cifar10_binary(&[test_file], Split::Test)?,
            ))
        }
    }
}

fn base_config(p: &TrainParams, data: &Dataset, seed: u64) -> TrainConfig {
    let depth = p.depth;
    let freeze_mask = match &p.train_layers {
        Some(l) => (1..=depth + 1).map(|x| !l.contains(&x)).collect(),
        None => vec![false; depth + 1],
    };
    TrainConfig {
        arch: Architecture::uniform(data.dim(), p.width, depth, data.classes, p.activation),
        init: InitSpec::new(p.sigma_w2, p.sigma_b2, seed),
        learning_rate: p.learning_rate,
        batch_size: p.batch_size,
        steps: p.steps,
        freeze_mask,
        checkpoint_every: p.checkpoint_every,
        data_subset: (p.data_subset > 0).then_some(p.data_subset),
        seed,
        zero_readout: p.zero_readout,
        probe_refine: p.refine.policy(),
    }
}

/// Rows of one run in the run CSV schema; returns the number of probe
/// profiles that hit the sample cap.
fn run_table(run: &TrainRun) -> Result<(Table, usize)> {
    let mut table = Table::new(&RUN_COLUMNS)?;
    let mut unsettled = 0;
    for c in &run.checkpoints {
        for m in [&c.train, &c.test] {
            table.row([
                c.step.to_string(),
                m.split.name().to_string(),
                float(m.accuracy),
                float(m.loss),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        for (kind, profile) in &c.probes {
            unsettled += usize::from(!profile.converged);
            let lengths = std::iter::once(profile.input_length).chain(profile.hidden_lengths().iter().copied());
            for (layer, len) in lengths.enumerate() {
                table.row([
                    c.step.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    layer.to_string(),
                    kind.name().to_string(),
                    float(len),
                ])?;
            }
        }
    }
    Ok((table, unsettled))
}

fn flag_run(report: &mut Report, label: &str, run: &TrainRun, unsettled: usize) {
    if let Some((step, loss)) = run.diverged {
        report.flag(Status::Diverged, format!("{label}: non-finite loss {loss} at step {step}"));
    }
    if unsettled > 0 {
        report.flag(
            Status::NonConverged,
            format!("{label}: {unsettled} probe profiles hit the sample cap"),
        );
    }
}

pub(crate) fn train_traj(p: &TrainParams, seed: u64, out: &mut OutDir) -> Result<Report> {
    let (train_set, test_set) = load(p)?;
    let config = base_config(p, &train_set, seed);
    let init = config.initial_network()?;
    let run = train(&config, &train_set, &test_set)?;
    let (table, unsettled) = run_table(&run)?;
    out.table("run.csv", table)?;
    let init_digest = out.network("network_init.json", &init)?;
    out.network("network_final.json", &run.network)?;
    let mut report = Report::ok();
    flag_run(&mut report, "train-traj", &run, unsettled);
    report.extra.insert("init_sha256".into(), init_digest.into());
    report.extra.insert("train_examples".into(), config.data_subset.unwrap_or(train_set.len()).min(train_set.len()).into());
    report.extra.insert("test_examples".into(), test_set.len().into());
    Ok(report)
}

pub fn freeze_file(layer: usize) -> String {
    format!("layer_{layer}.csv")
}

pub(crate) fn train_freeze(p: &TrainParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let (train_set, test_set) = load(p)?;
    let base = base_config(p, &train_set, seed);
    let layers = p.layers.clone().unwrap_or_else(|| (1..=p.depth).collect());
    let rd = remaining_depth_experiment(&base, &layers, &train_set, &test_set, par)?;
    let init_digest = out.network("network_init.json", &rd.initial_network)?;

    let mut baseline = Table::new(&["split", "accuracy", "loss"])?;
    for m in [&rd.baseline_train, &rd.baseline_test] {
        baseline.row([m.split.name().to_string(), float(m.accuracy), float(m.loss)])?;
    }
    out.table("baseline.csv", baseline)?;

    let mut report = Report::ok();
    let mut runs = Vec::new();
    for (layer, run) in &rd.runs {
        let (table, unsettled) = run_table(run)?;
        let file = freeze_file(*layer);
        out.table(&file, table)?;
        out.network(&format!("network_layer_{layer}.json"), &run.network)?;
        // Re-derive each run's starting point from its own config.
        let own_init = expressivity::net::format::to_string(&run.config.initial_network()?)?;
        runs.push(serde_json::json!({
            "layer": layer,
            "file": file,
            "init_sha256": sha256_hex(own_init.as_bytes()),
        }));
        flag_run(&mut report, &format!("layer {layer}"), run, unsettled);
    }
    report.extra.insert("init_sha256".into(), init_digest.into());
    report.extra.insert("runs".into(), runs.into());
    Ok(report)
}
