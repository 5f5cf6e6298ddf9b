//! dichotomies: dichotomies.csv, one row per (trial, sweep).

use expressivity::measures::{count_dichotomies, sphere_inputs, SweepMode};
use expressivity::net::{Architecture, InitSpec};
use expressivity::par::Parallelism;
use expressivity::rng::replica_seed;

use super::Report;
use crate::config::DichotomiesParams;
use crate::error::Result;
use crate::output::{OutDir, Table};

pub const COLUMNS: [&str; 7] = ["trial", "mode", "layer", "s", "samples", "distinct", "ties"];

pub(crate) fn run(p: &DichotomiesParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let arch = Architecture::uniform(p.input_dim, p.width, p.depth, 1, p.activation);
    let mut modes = Vec::new();
    if p.all_weights {
        modes.push(SweepMode::AllWeights);
    }
    modes.extend(p.layers.iter().map(|&d| SweepMode::Layer(d)));

    let mut table = Table::new(&COLUMNS)?;
    let mut ties = 0;
    for trial in 0..p.trials {
        // Every sweep of a trial sees the same inputs and base network.
        let s = replica_seed(seed, trial as u64);
        let inputs = sphere_inputs(p.s, p.input_dim, s);
        let init = InitSpec::new(p.sigma_w2, p.sigma_b2, s);
        for &mode in &modes {
            let r = count_dichotomies(&arch, &init, inputs.view(), p.samples, mode, par)?;
            ties += r.ties;
            let (name, layer) = match mode {
                SweepMode::AllWeights => ("all", String::new()),
                SweepMode::Layer(d) => ("layer", d.to_string()),
            };
            table.row([
                trial.to_string(),
                name.to_string(),
                layer,
                r.s.to_string(),
                r.samples.to_string(),
                r.distinct.to_string(),
                r.ties.to_string(),
            ])?;
        }
    }
    out.table("dichotomies.csv", table)?;
    let mut report = Report::ok();
    if ties > 0 {
        report
            .notes
            .push(format!("{ties} exact zero readouts were labelled positive"));
    }
    Ok(report)
}
