//! transitions: transitions.csv and transitions_fit.csv.
//!
//! Each row pairs the transitions of hidden layer `d` with the length of the
//! curve that layer receives, i.e. the image at layer `d - 1` (the input for
//! `d = 1`).

use expressivity::measures::transitions_with_lengths;
use expressivity::net::{Architecture, InitSpec, Network};
use expressivity::par::{map_indexed, Parallelism};
use expressivity::rng::replica_seed;
use expressivity::stats::linear_fit;
use expressivity::traj::replica_trajectory;

use super::Report;
use crate::config::TransitionsParams;
use crate::error::Result;
use crate::output::{float, OutDir, Status, Table};

pub const CONFIG_COLUMNS: [&str; 8] = [
    "k",
    "sigma_w2",
    "sigma_b2",
    "depth",
    "input_dim",
    "activation",
    "mode",
    "seed",
];

pub(crate) fn run(p: &TransitionsParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let mut grid = Vec::new();
    for &k in &p.k {
        for &sw in &p.sigma_w2 {
            for &sb in &p.sigma_b2 {
                grid.push((k, sw, sb));
            }
        }
    }
    let r = p.replicas;
    let refine = p.refine.policy();
    let results = map_indexed(par, grid.len() * r, |i| {
        let (k, sw, sb) = grid[i / r];
        let s = replica_seed(seed, (i % r) as u64);
        let arch = Architecture::uniform(p.input_dim, k, p.depth, 1, p.activation);
        let net = Network::sample(&arch, &InitSpec::new(sw, sb, s))?.without_readout();
        let traj = replica_trajectory(p.input_dim, s)?;
        transitions_with_lengths(&net, &traj, p.mode, &refine)
    });

    let cols = |extra: &[&str]| CONFIG_COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect::<Vec<_>>();
    let mut table = Table::new(&cols(&["replica", "layer", "length_in", "length_out", "transitions", "converged"]))?;
    let mut fits = Table::new(&cols(&["pairs", "slope", "intercept", "r_squared"]))?;
    let mut report = Report::ok();
    let mode = serde_json::to_value(p.mode)?.as_str().unwrap_or("sign").to_string();
    let mut results = results.into_iter();
    for &(k, sw, sb) in &grid {
        let cfg = [
            k.to_string(),
            float(sw),
            float(sb),
            p.depth.to_string(),
            p.input_dim.to_string(),
            p.activation.name().to_string(),
            mode.clone(),
            seed.to_string(),
        ];
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        let mut unsettled = 0;
        for rep in 0..r {
            let (count, profile) = results.next().expect("one result per replica")?;
            let settled = count.converged && profile.converged;
            unsettled += usize::from(!settled);
            for d in 1..=p.depth {
                let length_in = if d == 1 { profile.input_length } else { profile.layer_lengths[d - 2] };
                let t = count.per_layer[d - 1];
                xs.push(length_in);
                ys.push(t as f64);
                let extra = [
                    rep.to_string(),
                    d.to_string(),
                    float(length_in),
                    float(profile.layer_lengths[d - 1]),
                    t.to_string(),
                    settled.to_string(),
                ];
                table.row(cfg.iter().chain(&extra))?;
            }
        }
        let (slope, intercept, r2) = match linear_fit(&xs, &ys) {
            Some(f) => (f.slope, f.intercept, f.r_squared),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let extra = [xs.len().to_string(), float(slope), float(intercept), float(r2)];
        fits.row(cfg.iter().chain(&extra))?;
        if unsettled > 0 {
            report.flag(
                Status::NonConverged,
                format!("k={k} sigma_w2={sw} sigma_b2={sb}: {unsettled} of {r} replicas did not settle"),
            );
        }
    }
    out.table("transitions.csv", table)?;
    out.table("transitions_fit.csv", fits)?;
    Ok(report)
}
