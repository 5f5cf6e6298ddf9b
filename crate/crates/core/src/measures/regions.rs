//! Linear regions of a network restricted to a 2-D window.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::window::{lattice, Window};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::par::{map_indexed, Parallelism};

/// Pattern ids on a `resolution x resolution` lattice over a window.
///
/// Lattice point `(row, col)` sits at window coordinates
/// `(a_lo + col * da, b_lo + row * db)` with `da = (a_hi - a_lo) / resolution`,
/// so doubling the resolution only adds points. Regions thinner than a cell
/// can be missed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub window: Window,
    pub resolution: usize,
    /// Row-major; ids are assigned in order of first appearance.
    pub ids: Vec<u32>,
    pub count: usize,
    /// `layer_counts[d - 1]`: distinct patterns of hidden layers `1..=d`.
    pub layer_counts: Vec<usize>,
}

impl RegionMap {
    pub fn id(&self, row: usize, col: usize) -> u32 {
        self.ids[row * self.resolution + col]
    }
}

/// Run of equal patterns within one lattice row.
struct Run {
    start: usize,
    code: Vec<u8>,
}

fn row_runs(net: &Network, window: &Window, a: &[f64], b: f64) -> Result<Vec<Run>> {
    let pre = net.pre_activations_batch(window.row_points(a, b).view())?;
    let act = net.activation();
    let width: usize = pre.iter().map(|h| h.ncols()).sum();
    let mut runs: Vec<Run> = Vec::new();
    let mut code = Vec::with_capacity(width);
    for col in 0..a.len() {
        code.clear();
        for h in &pre {
            code.extend(h.row(col).iter().map(|&v| act.state(v).rank()));
        }
        if runs.last().is_none_or(|r| r.code != code) {
            runs.push(Run {
                start: col,
                code: code.clone(),
            });
        }
    }
    Ok(runs)
}

/// Distinct activation patterns over the window lattice.
///
/// Rows are evaluated independently and merged in row order, so the id
/// assignment does not depend on `par`.
pub fn count_regions_2d(net: &Network, window: &Window, resolution: usize, par: Parallelism) -> Result<RegionMap> {
    window.validate(net.input_dim())?;
    if resolution < 2 {
        return Err(Error::invalid("resolution must be >= 2"));
    }
    let a = lattice(window.a_range, resolution);
    let b = lattice(window.b_range, resolution);
    let rows = map_indexed(par, resolution, |r| row_runs(net, window, &a, b[r]));

    let mut seen: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut order: Vec<Vec<u8>> = Vec::new();
    let mut ids = Vec::with_capacity(resolution * resolution);
    for runs in rows {
        let runs = runs?;
        for (i, run) in runs.iter().enumerate() {
            let end = runs.get(i + 1).map_or(resolution, |r| r.start);
            let id = *seen.entry(run.code.clone()).or_insert_with(|| {
                order.push(run.code.clone());
                (order.len() - 1) as u32
            });
            ids.extend(std::iter::repeat_n(id, end - run.start));
        }
    }

    let mut offset = 0;
    let layer_counts = net
        .hidden_widths()
        .iter()
        .map(|w| {
            offset += w;
            order.iter().map(|c| &c[..offset]).collect::<HashSet<_>>().len()
        })
        .collect();
    Ok(RegionMap {
        window: window.clone(),
        resolution,
        ids,
        count: order.len(),
        layer_counts,
    })
}
