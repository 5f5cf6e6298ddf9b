//! Neuron transitions along a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Activation, Network};
use crate::traj::refine::{relative_change_below, Coding, Outcome, Pt, RefinePolicy, Refiner, SegmentMeasure};
use crate::traj::{segment_norm, LengthProfile, Trajectory};

/// What counts as one transition of a neuron.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionMode {
    /// The pre-activation changes sign (`h > 0` versus `h <= 0`).
    #[default]
    Sign,
    /// The neuron changes linear piece; a jump across both hard-tanh
    /// breakpoints counts twice.
    Region,
}

/// Which neurons are summed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Hidden layer `d`, 1-based.
    Layer(usize),
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCount {
    pub mode: TransitionMode,
    pub scope: Scope,
    /// Transitions of each hidden layer `1..=n`; layers outside the scope
    /// are zero.
    pub per_layer: Vec<u64>,
    pub samples: usize,
    /// `false` when the sample cap was hit before the count settled.
    pub converged: bool,
}

impl TransitionCount {
    /// Sum over the layers in scope.
    pub fn total(&self) -> u64 {
        self.per_layer.iter().sum()
    }
}

struct TransitionMeasure {
    mode: TransitionMode,
    activation: Activation,
    /// Hidden layers evaluated.
    layers: usize,
    /// First counted layer (0-based).
    first: usize,
    /// Also accumulate per-layer lengths (input plus every evaluated layer).
    lengths: bool,
}

impl TransitionMeasure {
    fn counted(&self) -> usize {
        self.layers - self.first
    }
}

impl SegmentMeasure for TransitionMeasure {
    fn width(&self) -> usize {
        self.counted() + if self.lengths { 1 + self.layers } else { 0 }
    }

    fn layers(&self) -> usize {
        self.layers
    }

    fn coding(&self) -> Coding {
        Coding::PatternAndSign
    }

    fn accumulate(&self, a: Pt<'_>, b: Pt<'_>, acc: &mut [f64]) {
        let (counts, lengths) = acc.split_at_mut(self.counted());
        for (slot, d) in counts.iter_mut().zip(self.first..self.layers) {
            let (ha, hb) = (a.pre(d), b.pre(d));
            let n: u32 = match self.mode {
                TransitionMode::Sign => ha.iter().zip(hb).map(|(&x, &y)| u32::from((x > 0.0) != (y > 0.0))).sum(),
                TransitionMode::Region => {
                    let act = self.activation;
                    ha.iter()
                        .zip(hb)
                        .map(|(&x, &y)| u32::from(act.state(x).rank().abs_diff(act.state(y).rank())))
                        .sum()
                }
            };
            *slot += f64::from(n);
        }
        if self.lengths {
            lengths[0] += segment_norm(a.x().iter(), b.x().iter());
            for d in 0..self.layers {
                lengths[1 + d] += segment_norm(a.act(d).iter(), b.act(d).iter());
            }
        }
    }
}

fn counts_stable(history: &[Vec<f64>], counted: usize) -> bool {
    const ROUNDS: usize = 2;
    history.len() > ROUNDS
        && history[history.len() - ROUNDS - 1..]
            .windows(2)
            .all(|w| w[0][..counted] == w[1][..counted])
}

fn run(
    net: &Network,
    traj: &Trajectory,
    scope: Scope,
    mode: TransitionMode,
    refine: &RefinePolicy,
    lengths: bool,
) -> Result<(TransitionCount, Outcome, usize)> {
    let (first, layers) = match scope {
        Scope::All => (0, net.depth()),
        Scope::Layer(d) if (1..=net.depth()).contains(&d) => (d - 1, d),
        Scope::Layer(d) => {
            return Err(Error::invalid(format!(
                "layer {d} out of range 1..={}",
                net.depth()
            )))
        }
    };
    let measure = TransitionMeasure {
        mode,
        activation: net.activation(),
        layers,
        first,
        lengths,
    };
    let counted = measure.counted();
    let refiner = Refiner { net, traj, measure };
    let outcome = refiner.run(refine, |h| {
        counts_stable(h, counted)
            && (!lengths || relative_change_below(&h.iter().map(|v| v[counted..].to_vec()).collect::<Vec<_>>(), refine.rel_tol))
    })?;
    let mut per_layer = vec![0; net.depth()];
    for (slot, c) in per_layer[first..layers].iter_mut().zip(&outcome.totals) {
        *slot = *c as u64;
    }
    let count = TransitionCount {
        mode,
        scope,
        per_layer,
        samples: outcome.segments,
        converged: outcome.converged,
    };
    Ok((count, outcome, counted))
}

/// Transitions of the neurons in `scope` along `traj`.
///
/// Sampling is refined until the count is unchanged over two consecutive
/// refinements, or the cap in `refine` is reached.
pub fn count_transitions(
    net: &Network,
    traj: &Trajectory,
    scope: Scope,
    mode: TransitionMode,
    refine: &RefinePolicy,
) -> Result<TransitionCount> {
    run(net, traj, scope, mode, refine, false).map(|(c, _, _)| c)
}

/// Per-layer transitions and per-layer lengths from a single refinement.
///
/// Sampling continues until both the counts have settled and every length
/// meets `refine.rel_tol`.
pub fn transitions_with_lengths(
    net: &Network,
    traj: &Trajectory,
    mode: TransitionMode,
    refine: &RefinePolicy,
) -> Result<(TransitionCount, LengthProfile)> {
    let (count, outcome, counted) = run(net, traj, Scope::All, mode, refine, true)?;
    let lengths = &outcome.totals[counted..];
    let profile = LengthProfile {
        input_length: lengths[0],
        layer_lengths: lengths[1..].to_vec(),
        include_output: false,
        samples: outcome.segments,
        converged: outcome.converged,
    };
    Ok((count, profile))
}
