//! traj-growth: lengths.csv, ratios.csv, log_lengths.csv, growth_fit.csv.

use expressivity::par::Parallelism;
use expressivity::stats::linear_fit;
use expressivity::traj::{growth_sweep, BoundSpec, GrowthConfig, GrowthStats, GrowthSweep};

use super::Report;
use crate::config::GrowthParams;
use crate::error::Result;
use crate::output::{float, OutDir, Status, Table};

pub const CONFIG_COLUMNS: [&str; 7] = ["k", "sigma_w2", "sigma_b2", "depth", "input_dim", "activation", "seed"];

fn config_fields(c: &GrowthConfig, seed: u64) -> Vec<String> {
    vec![
        c.k.to_string(),
        float(c.sigma_w_sq),
        float(c.sigma_b_sq),
        c.depth.to_string(),
        c.input_dim.to_string(),
        c.activation.name().to_string(),
        seed.to_string(),
    ]
}

fn header(extra: &[&str]) -> Vec<String> {
    CONFIG_COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect()
}

/// Layers used by the growth fit: `2..=depth`, or every layer of a net too
/// shallow for that.
pub fn fit_layers(depth: usize) -> std::ops::RangeInclusive<usize> {
    if depth >= 3 {
        2..=depth
    } else {
        0..=depth
    }
}

pub(crate) fn run(p: &GrowthParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let configs = GrowthConfig::grid(&p.k, &p.sigma_w2, &p.sigma_b2, &p.depth, p.input_dim, p.activation);
    let stats = growth_sweep(&GrowthSweep {
        configs,
        replicas: p.replicas,
        seed,
        refine: p.refine.policy(),
        include_output: p.include_output,
        parallelism: par,
    })?;

    let mut lengths = Table::new(&header(&["replica", "layer", "length"]))?;
    let mut ratios = Table::new(&header(&["layer", "mean_ratio", "std", "bound_factor"]))?;
    let mut logs = Table::new(&header(&["layer", "mean_log_length", "log_mean_length", "bound_log_length"]))?;
    let mut fits = Table::new(&header(&[
        "first_layer",
        "last_layer",
        "slope",
        "intercept",
        "r_squared",
        "ln_bound_factor",
    ]))?;
    let mut report = Report::ok();

    for st in &stats {
        let cfg = config_fields(&st.config, seed);
        let row = |extra: Vec<String>| cfg.iter().cloned().chain(extra).collect::<Vec<_>>();
        for (r, prof) in st.profiles.iter().enumerate() {
            let all = std::iter::once(prof.input_length).chain(prof.layer_lengths.iter().copied());
            for (layer, len) in all.enumerate() {
                lengths.row(row(vec![r.to_string(), layer.to_string(), float(len)]))?;
            }
        }
        let g = st.bound.per_layer_factor;
        for d in 1..=st.config.depth {
            ratios.row(row(vec![
                d.to_string(),
                float(st.ratio_mean[d - 1]),
                float(st.ratio_std[d - 1]),
                float(g),
            ]))?;
        }
        for d in 0..=st.config.depth {
            logs.row(row(vec![
                d.to_string(),
                float(st.mean_log_length[d]),
                float(st.log_mean_length[d]),
                float(st.mean_log_length[0] + d as f64 * g.ln()),
            ]))?;
        }
        let (xs, ys) = fit_series(st);
        let range = fit_layers(st.config.depth);
        let (slope, intercept, r2) = match linear_fit(&xs, &ys) {
            Some(f) => (f.slope, f.intercept, f.r_squared),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        fits.row(row(vec![
            range.start().to_string(),
            range.end().to_string(),
            float(slope),
            float(intercept),
            float(r2),
            float(g.ln()),
        ]))?;
        if st.non_converged > 0 {
            report.flag(
                Status::NonConverged,
                format!(
                    "k={} sigma_w2={} sigma_b2={} depth={}: {} of {} replicas hit the sample cap",
                    st.config.k, st.config.sigma_w_sq, st.config.sigma_b_sq, st.config.depth, st.non_converged, st.replicas
                ),
            );
        }
    }
    out.table("lengths.csv", lengths)?;
    out.table("ratios.csv", ratios)?;
    out.table("log_lengths.csv", logs)?;
    out.table("growth_fit.csv", fits)?;
    report.extra.insert(
        "bound_constant".into(),
        serde_json::json!({
            "value": BoundSpec::CONSTANT,
            "caveat": "the growth lower bound holds up to an unspecified constant factor; 1 is assumed, so compare slopes rather than intercepts",
        }),
    );
    Ok(report)
}

/// `(layer, mean log length)` over [`fit_layers`].
fn fit_series(st: &GrowthStats) -> (Vec<f64>, Vec<f64>) {
    fit_layers(st.config.depth)
        .map(|d| (d as f64, st.mean_log_length[d]))
        .unzip()
}
