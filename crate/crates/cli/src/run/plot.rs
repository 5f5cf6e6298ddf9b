//! plot-data: derived, plot-ready series from an earlier run directory.
//!
//! Inputs are checked against the source manifest's digests before use, and
//! the source digest is echoed so figures can cite it.

use std::collections::BTreeMap;
use std::path::Path;

use expressivity::stats::{mean, std_dev};

use super::training::{freeze_file, RUN_COLUMNS};
use super::Report;
use crate::config::{Kind, PlotParams};
use crate::error::{CliError, Result};
use crate::output::{float, read_csv, sha256_hex, OutDir, RunManifest, Table};

/// Verified rows of `file` from the source run.
struct Source<'a> {
    dir: &'a Path,
    manifest: RunManifest,
}

impl Source<'_> {
    fn bytes(&self, file: &str) -> Result<Vec<u8>> {
        let entry = self
            .manifest
            .output(file)
            .ok_or_else(|| CliError::config(format!("{}: manifest lists no `{file}`", self.dir.display())))?;
        let path = self.dir.join(file);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(CliError::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::InvalidData, "content does not match manifest digest"),
            ));
        }
        Ok(bytes)
    }

    fn csv(&self, file: &str, expected: &[&str]) -> Result<Vec<Vec<String>>> {
        self.bytes(file)?;
        let (header, rows) = read_csv(&self.dir.join(file))?;
        if header != expected {
            return Err(CliError::config(format!(
                "{file}: header {header:?} does not match expected {expected:?}"
            )));
        }
        Ok(rows)
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| CliError::config(format!("not a number: `{s}`")))
}

pub(crate) fn run(p: &PlotParams, out: &mut OutDir) -> Result<Report> {
    let manifest = RunManifest::read(&p.input)?;
    let kind = Kind::from_name(&manifest.kind)
        .ok_or_else(|| CliError::config(format!("unknown run kind `{}`", manifest.kind)))?;
    let src = Source { dir: &p.input, manifest };
    match kind {
        Kind::TrajGrowth => growth(&src, out)?,
        Kind::Transitions => transitions(&src, out)?,
        Kind::Regions => regions(&src, out)?,
        Kind::Boundaries => boundaries(&src, out)?,
        Kind::Dichotomies => dichotomies(&src, out)?,
        Kind::TrainTraj => training(&src, &[("run".to_string(), "run.csv".to_string())], out)?,
        Kind::TrainFreeze => {
            let runs = src
                .manifest
                .extra
                .get("runs")
                .and_then(|r| r.as_array())
                .ok_or_else(|| CliError::config("train-freeze manifest lists no runs"))?
                .iter()
                .map(|r| {
                    let layer = r["layer"].as_u64().ok_or_else(|| CliError::config("run without layer"))?;
                    Ok((format!("layer_{layer}"), freeze_file(layer as usize)))
                })
                .collect::<Result<Vec<_>>>()?;
            training(&src, &runs, out)?;
            let rows = src.csv("baseline.csv", &["split", "accuracy", "loss"])?;
            let mut t = Table::new(&["split", "accuracy", "loss"])?;
            for r in rows {
                t.row(r)?;
            }
            out.table("baseline.csv", t)?;
        }
        Kind::PlotData => return Err(CliError::config("plot-data input must be an experiment run")),
    }
    let mut report = Report::ok();
    report.extra.insert("source_kind".into(), kind.name().into());
    report
        .extra
        .insert("source_manifest_sha256".into(), sha256_hex(&std::fs::read(p.input.join(crate::output::MANIFEST)).map_err(|e| CliError::io(&p.input, e))?).into());
    Ok(report)
}

fn with_config(config: &[&'static str], extra: &[&'static str]) -> Vec<&'static str> {
    config.iter().chain(extra).copied().collect()
}

/// Groups rows by their first `n` columns, keeping first-seen order.
fn group_by_prefix(rows: Vec<Vec<String>>, n: usize) -> Vec<(Vec<String>, Vec<Vec<String>>)> {
    let mut groups: Vec<(Vec<String>, Vec<Vec<String>>)> = Vec::new();
    for row in rows {
        let key = row[..n].to_vec();
        match groups.last_mut() {
            Some((k, g)) if *k == key => g.push(row),
            _ => groups.push((key, vec![row])),
        }
    }
    groups
}

fn growth(src: &Source, out: &mut OutDir) -> Result<()> {
    use super::growth::CONFIG_COLUMNS as C;
    let n = C.len();
    let cols = |extra: &[&'static str]| with_config(&C, extra);
    let lengths = src.csv("lengths.csv", &cols(&["replica", "layer", "length"]))?;
    let ratios = src.csv("ratios.csv", &cols(&["layer", "mean_ratio", "std", "bound_factor"]))?;
    let factors: BTreeMap<Vec<String>, f64> = group_by_prefix(ratios, n)
        .into_iter()
        .map(|(k, rows)| Ok((k, num(&rows[0][n + 3])?)))
        .collect::<Result<_>>()?;

    let mut t = Table::new(&cols(&["layer", "mean_log_length", "std_log_length", "bound_log_length"]))?;
    for (key, rows) in group_by_prefix(lengths, n) {
        let mut by_layer: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            let layer: usize = r[n + 1].parse().map_err(|_| CliError::config("bad layer"))?;
            by_layer.entry(layer).or_default().push(num(&r[n + 2])?.ln());
        }
        let g = factors.get(&key).copied().unwrap_or(f64::NAN);
        let base = by_layer.get(&0).map(|v| mean(v)).unwrap_or(f64::NAN);
        for (layer, logs) in &by_layer {
            let extra = [
                layer.to_string(),
                float(mean(logs)),
                float(std_dev(logs)),
                float(base + *layer as f64 * g.ln()),
            ];
            t.row(key.iter().chain(&extra))?;
        }
    }
    out.table("growth_curves.csv", t)
}

fn transitions(src: &Source, out: &mut OutDir) -> Result<()> {
    use super::transitions::CONFIG_COLUMNS as C;
    let n = C.len();
    let cols = |extra: &[&'static str]| with_config(&C, extra);
    let rows = src.csv(
        "transitions.csv",
        &cols(&["replica", "layer", "length_in", "length_out", "transitions", "converged"]),
    )?;
    let mut t = Table::new(&cols(&["layer", "mean_length_in", "mean_transitions", "replicas"]))?;
    for (key, rows) in group_by_prefix(rows, n) {
        let mut by_layer: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in &rows {
            let layer: usize = r[n + 1].parse().map_err(|_| CliError::config("bad layer"))?;
            let e = by_layer.entry(layer).or_default();
            e.0.push(num(&r[n + 2])?);
            e.1.push(num(&r[n + 4])?);
        }
        for (layer, (ls, ts)) in &by_layer {
            let extra = [layer.to_string(), float(mean(ls)), float(mean(ts)), ls.len().to_string()];
            t.row(key.iter().chain(&extra))?;
        }
    }
    out.table("transitions_series.csv", t)
}

fn regions(src: &Source, out: &mut OutDir) -> Result<()> {
    let text = String::from_utf8(src.bytes("regions.jsonl")?)
        .map_err(|_| CliError::config("regions.jsonl is not utf-8"))?;
    let mut t = Table::new(&["layer", "count"])?;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line)?;
        t.row([v["layer"].to_string(), v["count"].to_string()])?;
    }
    out.table("region_counts.csv", t)
}

fn boundaries(src: &Source, out: &mut OutDir) -> Result<()> {
    let rows = src.csv("boundaries.csv", &["layer", "neuron", "level", "polyline", "x", "y"])?;
    let mut t = Table::new(&["layer", "neuron", "level", "polylines", "points"])?;
    for (key, rows) in group_by_prefix(rows, 3) {
        let mut ids: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
        ids.dedup();
        t.row(key.iter().cloned().chain([ids.len().to_string(), rows.len().to_string()]))?;
    }
    out.table("boundary_summary.csv", t)
}

fn dichotomies(src: &Source, out: &mut OutDir) -> Result<()> {
    use super::dichotomies::COLUMNS;
    let rows = src.csv("dichotomies.csv", &COLUMNS)?;
    let mut by_mode: Vec<((String, String), Vec<f64>)> = Vec::new();
    for r in rows {
        let key = (r[1].clone(), r[2].clone());
        let v = num(&r[5])?;
        match by_mode.iter_mut().find(|(k, _)| *k == key) {
            Some((_, vs)) => vs.push(v),
            None => by_mode.push((key, vec![v])),
        }
    }
    let mut t = Table::new(&["mode", "layer", "trials", "mean_distinct", "std_distinct", "min_distinct", "max_distinct"])?;
    for ((mode, layer), vs) in by_mode {
        let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        t.row([
            mode,
            layer,
            vs.len().to_string(),
            float(mean(&vs)),
            float(std_dev(&vs)),
            float(min),
            float(max),
        ])?;
    }
    out.table("dichotomy_summary.csv", t)
}

/// accuracy.csv and probe_summary.csv; the first hidden layer is reported
/// on its own, next to the mean over layers `2..=n`.
fn training(src: &Source, runs: &[(String, String)], out: &mut OutDir) -> Result<()> {
    let mut acc = Table::new(&["run", "step", "split", "accuracy", "loss"])?;
    let mut probes = Table::new(&["run", "step", "probe", "first_layer_length", "mean_later_length"])?;
    for (name, file) in runs {
        let rows = src.csv(file, &RUN_COLUMNS)?;
        let mut lengths: BTreeMap<(usize, String), BTreeMap<usize, f64>> = BTreeMap::new();
        for r in &rows {
            let step: usize = r[0].parse().map_err(|_| CliError::config("bad step"))?;
            if !r[1].is_empty() {
                acc.row([name.clone(), r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone()])?;
            } else {
                let layer: usize = r[4].parse().map_err(|_| CliError::config("bad layer"))?;
                lengths.entry((step, r[5].clone())).or_default().insert(layer, num(&r[6])?);
            }
        }
        for ((step, probe), by_layer) in &lengths {
            let later: Vec<f64> = by_layer.iter().filter(|(&l, _)| l >= 2).map(|(_, &v)| v).collect();
            probes.row([
                name.clone(),
                step.to_string(),
                probe.clone(),
                float(by_layer.get(&1).copied().unwrap_or(f64::NAN)),
                float(mean(&later)),
            ])?;
        }
    }
    out.table("accuracy.csv", acc)?;
    out.table("probe_summary.csv", probes)
}
