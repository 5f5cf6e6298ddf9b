//! regions and boundaries over a 2-D window of input space.

use std::fs::File;
use std::io::BufReader;

use expressivity::measures::{boundary_contours, count_regions_2d, Window};
use expressivity::net::format::read_network;
use expressivity::net::{Architecture, InitSpec, Network};
use expressivity::par::Parallelism;

use super::Report;
use crate::config::PlaneParams;
use crate::error::{CliError, Result};
use crate::output::{float, OutDir, Table};

fn network(p: &PlaneParams, seed: u64) -> Result<Network> {
    match &p.network {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(read_network(BufReader::new(f))?.without_readout())
        }
        None => {
            let arch = Architecture {
                input_dim: p.input_dim,
                hidden_widths: p.widths.clone(),
                output_dim: 1,
                activation: p.activation,
            };
            Ok(Network::sample(&arch, &InitSpec::new(p.sigma_w2, p.sigma_b2, seed))?.without_readout())
        }
    }
}

fn window(p: &PlaneParams, input_dim: usize) -> Result<Window> {
    let mut w = Window::axes(input_dim, p.a_range, p.b_range);
    if let Some(o) = &p.origin {
        w.origin = o.clone();
    }
    if let Some(u) = &p.u {
        w.u = u.clone();
    }
    if let Some(v) = &p.v {
        w.v = v.clone();
    }
    w.validate(input_dim)?;
    Ok(w)
}

/// regions.csv holds, for every hidden layer `l`, the pattern ids of layers
/// `1..=l` on the lattice; regions.jsonl has one count per layer.
pub(crate) fn regions(p: &PlaneParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let net = network(p, seed)?;
    let win = window(p, net.input_dim())?;
    out.network("network.json", &net)?;
    let mut grid = Table::new(&["row", "col", "layer", "pattern_id"])?;
    let mut summary = String::new();
    for layer in 1..=net.depth() {
        let map = count_regions_2d(&net.slice(0..layer)?, &win, p.resolution, par)?;
        for row in 0..map.resolution {
            for col in 0..map.resolution {
                grid.row([
                    row.to_string(),
                    col.to_string(),
                    layer.to_string(),
                    map.id(row, col).to_string(),
                ])?;
            }
        }
        let line = serde_json::json!({
            "layer": layer,
            "count": map.count,
            "resolution": p.resolution,
            "widths": net.hidden_widths(),
            "activation": net.activation().name(),
            "a_range": win.a_range,
            "b_range": win.b_range,
            "seed": seed,
        });
        summary.push_str(&serde_json::to_string(&line)?);
        summary.push('\n');
    }
    out.table("regions.csv", grid)?;
    out.text("regions.jsonl", &summary)?;
    Ok(Report::ok())
}

/// boundaries.csv: one row per polyline vertex, in window coordinates.
pub(crate) fn boundaries(p: &PlaneParams, seed: u64, par: Parallelism, out: &mut OutDir) -> Result<Report> {
    let net = network(p, seed)?;
    let win = window(p, net.input_dim())?;
    let up_to = p.up_to_layer.unwrap_or(net.depth());
    let set = boundary_contours(&net, &win, p.resolution, up_to, par)?;
    out.network("network.json", &net)?;
    let mut table = Table::new(&["layer", "neuron", "level", "polyline", "x", "y"])?;
    let mut polyline = 0usize;
    let mut last = None;
    for c in &set.contours {
        if last != Some((c.layer, c.neuron)) {
            polyline = 0;
            last = Some((c.layer, c.neuron));
        }
        for [x, y] in &c.points {
            table.row([
                c.layer.to_string(),
                c.neuron.to_string(),
                float(c.level),
                polyline.to_string(),
                float(*x),
                float(*y),
            ])?;
        }
        polyline += 1;
    }
    out.table("boundaries.csv", table)?;
    let mut report = Report::ok();
    report.extra.insert("polylines".into(), set.contours.len().into());
    report.extra.insert("up_to_layer".into(), up_to.into());
    Ok(report)
}
