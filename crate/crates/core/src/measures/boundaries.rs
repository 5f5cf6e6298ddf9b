//! Neuron boundaries in a 2-D window by marching squares.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::window::{closed_lattice, Window};
use crate::error::{Error, Result};
use crate::net::Network;
use crate::par::{map_indexed, Parallelism};

/// One polyline of one neuron's level set, in window coordinates.
/// Closed curves repeat their first point at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    /// Hidden layer, 1-based.
    pub layer: usize,
    /// Neuron within the layer, 0-based.
    pub neuron: usize,
    /// Pre-activation value traced.
    pub level: f64,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub window: Window,
    /// Lattice points per axis, window edges included.
    pub resolution: usize,
    pub up_to_layer: usize,
    /// Ordered by layer, neuron, level, then tracing order.
    pub contours: Vec<Contour>,
}

impl BoundarySet {
    pub fn for_neuron(&self, layer: usize, neuron: usize) -> impl Iterator<Item = &Contour> {
        self.contours
            .iter()
            .filter(move |c| c.layer == layer && c.neuron == neuron)
    }

    /// Length of one lattice cell diagonal in window coordinates.
    pub fn cell_diagonal(&self) -> f64 {
        let n = (self.resolution - 1) as f64;
        let da = (self.window.a_range[1] - self.window.a_range[0]) / n;
        let db = (self.window.b_range[1] - self.window.b_range[0]) / n;
        da.hypot(db)
    }
}

/// Crossing point of a level set with a lattice edge.
#[derive(Clone, Copy)]
struct Crossing {
    /// Horizontal edges `(r, c)-(r, c+1)` are even, vertical `(r, c)-(r+1, c)` odd.
    edge: u64,
    at: [f64; 2],
}

struct Segment {
    target: usize,
    ends: [Crossing; 2],
}

/// Level-set target: a (layer, neuron, level) triple.
#[derive(Clone, Copy)]
struct Target {
    layer: usize,
    neuron: usize,
    level: f64,
}

struct Grid<'a> {
    a: &'a [f64],
    b: &'a [f64],
}

impl Grid<'_> {
    fn h_edge(&self, r: usize, c: usize, f0: f64, f1: f64) -> Crossing {
        let t = f0 / (f0 - f1);
        Crossing {
            edge: ((r * self.a.len() + c) as u64) << 1,
            at: [self.a[c] + t * (self.a[c + 1] - self.a[c]), self.b[r]],
        }
    }

    fn v_edge(&self, r: usize, c: usize, f0: f64, f1: f64) -> Crossing {
        let t = f0 / (f0 - f1);
        Crossing {
            edge: (((r * self.a.len() + c) as u64) << 1) | 1,
            at: [self.a[c], self.b[r] + t * (self.b[r + 1] - self.b[r])],
        }
    }

    /// Marching-squares segments of `f > 0` in cell `(r, c)` given corner
    /// values `f00 = f(r, c)`, `f01 = f(r, c+1)`, `f10 = f(r+1, c)`,
    /// `f11 = f(r+1, c+1)`. Saddles are split by the cell-centre average.
    fn cell(&self, r: usize, c: usize, [f00, f01, f10, f11]: [f64; 4], out: &mut Vec<[Crossing; 2]>) {
        let inside = |f: f64| f > 0.0;
        let (s00, s01, s10, s11) = (inside(f00), inside(f01), inside(f10), inside(f11));
        let bottom = || self.h_edge(r, c, f00, f01);
        let top = || self.h_edge(r + 1, c, f10, f11);
        let left = || self.v_edge(r, c, f00, f10);
        let right = || self.v_edge(r, c + 1, f01, f11);
        let mut edges = Vec::with_capacity(4);
        if s00 != s01 {
            edges.push(bottom());
        }
        if s01 != s11 {
            edges.push(right());
        }
        if s10 != s11 {
            edges.push(top());
        }
        if s00 != s10 {
            edges.push(left());
        }
        match edges.len() {
            0 => {}
            2 => out.push([edges[0], edges[1]]),
            _ => {
                let centre = inside(0.25 * (f00 + f01 + f10 + f11));
                if centre == s00 {
                    // 00 and 11 joined through the centre; cut off 01 and 10.
                    out.push([bottom(), right()]);
                    out.push([top(), left()]);
                } else {
                    out.push([left(), bottom()]);
                    out.push([right(), top()]);
                }
            }
        }
    }
}

fn join(segments: &[[Crossing; 2]]) -> Vec<Vec<[f64; 2]>> {
    let mut incident: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        for e in s {
            incident.entry(e.edge).or_default().push(i);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let trace = |start: usize, from_edge: u64, used: &mut Vec<bool>| {
        let mut points = Vec::new();
        let (mut seg, mut entry) = (start, from_edge);
        loop {
            used[seg] = true;
            let s = &segments[seg];
            let (first, second) = if s[0].edge == entry { (s[0], s[1]) } else { (s[1], s[0]) };
            if points.is_empty() {
                points.push(first.at);
            }
            points.push(second.at);
            match incident[&second.edge].iter().find(|&&j| !used[j]) {
                Some(&next) => {
                    seg = next;
                    entry = second.edge;
                }
                None => break,
            }
        }
        points
    };
    // Open chains start at an edge touched by a single segment.
    for i in 0..segments.len() {
        if used[i] {
            continue;
        }
        if let Some(end) = segments[i].iter().find(|e| incident[&e.edge].len() == 1) {
            lines.push(trace(i, end.edge, &mut used));
        }
    }
    for i in 0..segments.len() {
        if !used[i] {
            lines.push(trace(i, segments[i][0].edge, &mut used));
        }
    }
    lines
}

/// Level sets of the pre-activation of every neuron in hidden layers
/// `1..=up_to_layer`: zero for ReLU, `-1` and `+1` for hard-tanh.
///
/// Polyline vertices are linear interpolations along lattice edges, so each
/// lies within one cell of the true level set.
pub fn boundary_contours(
    net: &Network,
    window: &Window,
    resolution: usize,
    up_to_layer: usize,
    par: Parallelism,
) -> Result<BoundarySet> {
    window.validate(net.input_dim())?;
    if resolution < 2 {
        return Err(Error::invalid("resolution must be >= 2"));
    }
    if up_to_layer == 0 || up_to_layer > net.depth() {
        return Err(Error::invalid(format!(
            "up_to_layer must be in 1..={}",
            net.depth()
        )));
    }
    let sub = net.slice(0..up_to_layer)?;
    let a = closed_lattice(window.a_range, resolution);
    let b = closed_lattice(window.b_range, resolution);
    let grid = Grid { a: &a, b: &b };
    let targets: Vec<Target> = sub
        .hidden_widths()
        .iter()
        .enumerate()
        .flat_map(|(d, &w)| {
            (0..w).flat_map(move |neuron| {
                net.activation().level_values().iter().map(move |&level| Target {
                    layer: d + 1,
                    neuron,
                    level,
                })
            })
        })
        .collect();
    let eval_row = |r: usize| -> Result<Array2<f64>> {
        let pre = sub.pre_activations_batch(window.row_points(&a, b[r]).view())?;
        let views: Vec<_> = pre.iter().map(|h| h.view()).collect();
        Ok(ndarray::concatenate(ndarray::Axis(1), &views).expect("rows share a length"))
    };

    let strips = map_indexed(par, resolution - 1, |r| -> Result<Vec<Segment>> {
        let (lo, hi) = (eval_row(r)?, eval_row(r + 1)?);
        let mut out = Vec::new();
        let mut cell = Vec::new();
        let mut col = 0;
        for (ti, t) in targets.iter().enumerate() {
            // Targets of one neuron are adjacent; the column advances per neuron.
            if ti > 0 && (targets[ti - 1].layer, targets[ti - 1].neuron) != (t.layer, t.neuron) {
                col += 1;
            }
            for c in 0..a.len() - 1 {
                let f = [lo[[c, col]], lo[[c + 1, col]], hi[[c, col]], hi[[c + 1, col]]].map(|v| v - t.level);
                cell.clear();
                grid.cell(r, c, f, &mut cell);
                out.extend(cell.iter().map(|&ends| Segment { target: ti, ends }));
            }
        }
        Ok(out)
    });

    let mut per_target: Vec<Vec<[Crossing; 2]>> = vec![Vec::new(); targets.len()];
    for strip in strips {
        for s in strip? {
            per_target[s.target].push(s.ends);
        }
    }
    let contours = targets
        .iter()
        .zip(&per_target)
        .flat_map(|(t, segs)| {
            join(segs).into_iter().map(move |points| Contour {
                layer: t.layer,
                neuron: t.neuron,
                level: t.level,
                points,
            })
        })
        .collect();
    Ok(BoundarySet {
        window: window.clone(),
        resolution,
        up_to_layer,
        contours,
    })
}
