//! Sample refinement along a trajectory.
//!
//! Both arc lengths and transition counts are sums of a per-segment quantity
//! over consecutive samples of the trajectory's image. The refiner owns the
//! sampling loop and leaves the per-segment quantity to a [`SegmentMeasure`].
//!
//! Two strategies:
//!
//! * `Uniform` doubles the number of uniformly spaced samples each round.
//! * `Adaptive` starts from the same uniform sampling and then bisects only
//!   segments whose two endpoints lie in different linear pieces of the
//!   network (different activation patterns). On a segment whose endpoints
//!   share a pattern the network is affine, so splitting it cannot change a
//!   layer's polyline length beyond the curvature of the input curve itself.

use std::hash::{DefaultHasher, Hasher};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::Network;
use crate::traj::Trajectory;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefineStrategy {
    Uniform,
    Adaptive,
}

/// Sampling density control. `initial_samples` and `max_samples` count
/// segments between consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinePolicy {
    pub initial_samples: usize,
    pub rel_tol: f64,
    pub max_samples: usize,
    pub strategy: RefineStrategy,
}

impl Default for RefinePolicy {
    fn default() -> Self {
        Self {
            initial_samples: 1024,
            rel_tol: 1e-3,
            max_samples: 1 << 20,
            strategy: RefineStrategy::Adaptive,
        }
    }
}

impl RefinePolicy {
    pub fn uniform() -> Self {
        Self {
            strategy: RefineStrategy::Uniform,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_samples == 0 {
            return Err(Error::invalid("initial_samples must be >= 1"));
        }
        if self.max_samples < self.initial_samples {
            return Err(Error::invalid("max_samples must be >= initial_samples"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be > 0"));
        }
        Ok(())
    }
}

/// Per-neuron discrete code used to decide which segments to bisect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Coding {
    /// Activation pattern only.
    Pattern,
    /// Activation pattern plus the sign of every pre-activation.
    PatternAndSign,
}

/// Network evaluated at a batch of sample points.
pub(crate) struct Evaluated {
    pub ts: Vec<f64>,
    pub x: Array2<f64>,
    /// Pre-activations of layers `1..=layers`.
    pub pre: Vec<Array2<f64>>,
    /// Activations of layers `1..=layers`.
    pub act: Vec<Array2<f64>>,
    pub out: Option<Array2<f64>>,
    pub sig: Vec<u64>,
}

/// One sample point: a batch and a row within it.
#[derive(Clone, Copy)]
pub(crate) struct Pt<'a> {
    pub ev: &'a Evaluated,
    pub row: usize,
}

impl<'a> Pt<'a> {
    pub fn x(&self) -> ndarray::ArrayView1<'a, f64> {
        self.ev.x.row(self.row)
    }

    pub fn pre(&self, d: usize) -> ndarray::ArrayView1<'a, f64> {
        self.ev.pre[d].row(self.row)
    }

    pub fn act(&self, d: usize) -> ndarray::ArrayView1<'a, f64> {
        self.ev.act[d].row(self.row)
    }

    pub fn out(&self) -> Option<ndarray::ArrayView1<'a, f64>> {
        self.ev.out.as_ref().map(|o| o.row(self.row))
    }

    fn sig(&self) -> u64 {
        self.ev.sig[self.row]
    }

    fn t(&self) -> f64 {
        self.ev.ts[self.row]
    }
}

pub(crate) trait SegmentMeasure: Sync {
    /// Length of the totals vector.
    fn width(&self) -> usize;
    /// Hidden layers that must be evaluated.
    fn layers(&self) -> usize;
    fn needs_output(&self) -> bool {
        false
    }
    fn coding(&self) -> Coding;
    /// Adds the contribution of the segment `a -> b` into `acc`.
    fn accumulate(&self, a: Pt<'_>, b: Pt<'_>, acc: &mut [f64]);
}

pub(crate) struct Outcome {
    pub totals: Vec<f64>,
    pub segments: usize,
    pub converged: bool,
}

pub(crate) struct Refiner<'a, M> {
    pub net: &'a Network,
    pub traj: &'a Trajectory,
    pub measure: M,
}

impl<M: SegmentMeasure> Refiner<'_, M> {
    fn evaluate(&self, ts: Vec<f64>) -> Result<Evaluated> {
        let x = self.traj.points_at(&ts);
        let act_kind = self.net.activation();
        let layers = self.measure.layers();
        let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
        let mut act: Vec<Array2<f64>> = Vec::with_capacity(layers);
        for layer in &self.net.hidden_layers()[..layers] {
            let h = match act.last() {
                None => layer.apply_batch(x.view()),
                Some(prev) => layer.apply_batch(prev.view()),
            };
            if let Some(bad) = h.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: "pre-activation along trajectory".into(),
                    value: *bad,
                });
            }
            act.push(h.mapv(|v| act_kind.apply(v)));
            pre.push(h);
        }
        let out = if self.measure.needs_output() {
            let readout = self
                .net
                .readout()
                .ok_or_else(|| Error::invalid("output layer requested but the network has no readout"))?;
            Some(readout.apply_batch(act.last().expect("at least one layer").view()))
        } else {
            None
        };
        let coding = self.measure.coding();
        let mut codes = Vec::new();
        let sig = (0..ts.len())
            .map(|p| {
                codes.clear();
                for h in &pre {
                    codes.extend(h.index_axis(Axis(0), p).iter().map(|&v| {
                        let rank = act_kind.state(v).rank();
                        match coding {
                            Coding::Pattern => rank,
                            Coding::PatternAndSign => rank * 2 + u8::from(v > 0.0),
                        }
                    }));
                }
                let mut hasher = DefaultHasher::new();
                hasher.write(&codes);
                hasher.finish()
            })
            .collect();
        Ok(Evaluated {
            ts,
            x,
            pre,
            act,
            out,
            sig,
        })
    }

    fn uniform_params(&self, n: usize, i: usize) -> f64 {
        let (t0, t1) = (self.traj.t_start(), self.traj.t_end());
        if i == n {
            t1
        } else {
            t0 + (t1 - t0) * i as f64 / n as f64
        }
    }

    /// Totals over `n` uniform segments, plus the segments whose endpoint
    /// signatures differ.
    fn uniform_pass(&self, n: usize, collect_dirty: bool) -> Result<(Vec<f64>, Vec<(f64, f64)>)> {
        let mut totals = vec![0.0; self.measure.width()];
        let mut dirty = Vec::new();
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let ev = self.evaluate((start..=end).map(|i| self.uniform_params(n, i)).collect())?;
            for i in 0..ev.ts.len() - 1 {
                let (a, b) = (Pt { ev: &ev, row: i }, Pt { ev: &ev, row: i + 1 });
                self.measure.accumulate(a, b, &mut totals);
                if collect_dirty && a.sig() != b.sig() {
                    dirty.push((a.t(), b.t()));
                }
            }
            start = end;
        }
        Ok((totals, dirty))
    }

    pub fn run<F>(&self, policy: &RefinePolicy, converged: F) -> Result<Outcome>
    where
        F: Fn(&[Vec<f64>]) -> bool,
    {
        policy.validate()?;
        if self.traj.dim() != self.net.input_dim() {
            return Err(Error::dims("trajectory dimension", self.net.input_dim(), self.traj.dim()));
        }
        match policy.strategy {
            RefineStrategy::Uniform => self.run_uniform(policy, converged),
            RefineStrategy::Adaptive => self.run_adaptive(policy, converged),
        }
    }

    fn run_uniform<F>(&self, policy: &RefinePolicy, converged: F) -> Result<Outcome>
    where
        F: Fn(&[Vec<f64>]) -> bool,
    {
        let mut n = policy.initial_samples;
        let mut history = Vec::new();
        loop {
            let (totals, _) = self.uniform_pass(n, false)?;
            history.push(totals);
            if converged(&history) {
                return Ok(Outcome {
                    totals: history.pop().expect("non-empty"),
                    segments: n,
                    converged: true,
                });
            }
            if n * 2 > policy.max_samples {
                return Ok(Outcome {
                    totals: history.pop().expect("non-empty"),
                    segments: n,
                    converged: false,
                });
            }
            n *= 2;
        }
    }

    /// Breadth-first bisection of dirty segments, one level per round.
    ///
    /// Chunks of segments are refined several levels ahead and their
    /// per-level contributions logged; the logged levels are then applied in
    /// order, so the result equals refining the whole trajectory one level at
    /// a time.
    fn run_adaptive<F>(&self, policy: &RefinePolicy, converged: F) -> Result<Outcome>
    where
        F: Fn(&[Vec<f64>]) -> bool,
    {
        let mut segments = policy.initial_samples;
        let (mut totals, dirty) = self.uniform_pass(segments, true)?;
        let mut history = vec![totals.clone()];
        let mut frontiers: Vec<Vec<(f64, f64)>> = dirty.chunks(CHUNK / 4).map(<[_]>::to_vec).collect();
        let mut levels = LevelLog::default();
        let mut applied = 0;
        let mut target = FIRST_ROUND_LEVELS;
        loop {
            for frontier in frontiers.iter_mut().filter(|f| !f.is_empty()) {
                *frontier = self.refine_chunk(frontier, applied, target, &mut levels)?;
            }
            for level in applied..target {
                let count = levels.segments.get(level).copied().unwrap_or(0);
                if count == 0 {
                    return Ok(Outcome {
                        totals,
                        segments,
                        converged: true,
                    });
                }
                if segments + count > policy.max_samples {
                    return Ok(Outcome {
                        totals,
                        segments,
                        converged: false,
                    });
                }
                segments += count;
                for (t, d) in totals.iter_mut().zip(&levels.deltas[level]) {
                    *t += d;
                }
                history.push(totals.clone());
                if converged(&history) {
                    return Ok(Outcome {
                        totals,
                        segments,
                        converged: true,
                    });
                }
            }
            applied = target;
            target += LATER_ROUND_LEVELS;
        }
    }

    /// Bisects one chunk of dirty segments from level `from` up to `to`.
    /// Returns the segments still dirty at level `to`.
    fn refine_chunk(
        &self,
        frontier: &[(f64, f64)],
        from: usize,
        to: usize,
        log: &mut LevelLog,
    ) -> Result<Vec<(f64, f64)>> {
        let width = self.measure.width();
        // batches[0] holds the chunk endpoints, batches[l + 1] the midpoints of level l.
        let mut batches = vec![self.evaluate(frontier.iter().flat_map(|&(a, b)| [a, b]).collect())?];
        let mut segs: Vec<((usize, usize), (usize, usize))> =
            (0..frontier.len()).map(|i| ((0, 2 * i), (0, 2 * i + 1))).collect();
        for level in from..to {
            let t_of = |(b, r): (usize, usize)| batches[b].ts[r];
            segs.retain(|&(a, b)| {
                let mid = 0.5 * (t_of(a) + t_of(b));
                mid > t_of(a) && mid < t_of(b)
            });
            if segs.is_empty() {
                break;
            }
            let mids = self.evaluate(segs.iter().map(|&(a, b)| 0.5 * (t_of(a) + t_of(b))).collect())?;
            batches.push(mids);
            let mid_batch = batches.len() - 1;
            let pt = |(b, r): (usize, usize)| Pt { ev: &batches[b], row: r };
            let mut old = vec![0.0; width];
            let mut new = vec![0.0; width];
            let mut next = Vec::with_capacity(segs.len());
            for (i, &(a, b)) in segs.iter().enumerate() {
                let m = (mid_batch, i);
                self.measure.accumulate(pt(a), pt(b), &mut old);
                self.measure.accumulate(pt(a), pt(m), &mut new);
                self.measure.accumulate(pt(m), pt(b), &mut new);
                if pt(a).sig() != pt(m).sig() {
                    next.push((a, m));
                }
                if pt(m).sig() != pt(b).sig() {
                    next.push((m, b));
                }
            }
            log.record(level, segs.len(), &old, &new);
            segs = next;
        }
        Ok(segs
            .into_iter()
            .map(|((ba, ra), (bb, rb))| (batches[ba].ts[ra], batches[bb].ts[rb]))
            .collect())
    }
}

const FIRST_ROUND_LEVELS: usize = 4;
const LATER_ROUND_LEVELS: usize = 2;

/// Per-level segment counts and total deltas accumulated across chunks.
#[derive(Default)]
struct LevelLog {
    segments: Vec<usize>,
    deltas: Vec<Vec<f64>>,
}

impl LevelLog {
    fn record(&mut self, level: usize, count: usize, old: &[f64], new: &[f64]) {
        if self.segments.len() <= level {
            self.segments.resize(level + 1, 0);
            self.deltas.resize(level + 1, vec![0.0; old.len()]);
        }
        self.segments[level] += count;
        for ((d, o), n) in self.deltas[level].iter_mut().zip(old).zip(new) {
            *d += n - o;
        }
    }
}

/// Every entry changed by at most `rel_tol` (relative) in the last round.
pub(crate) fn relative_change_below(history: &[Vec<f64>], rel_tol: f64) -> bool {
    let [.., prev, cur] = history else {
        return false;
    };
    prev.iter().zip(cur).all(|(&p, &c)| {
        let scale = c.abs().max(p.abs());
        scale == 0.0 || (c - p).abs() <= rel_tol * scale
    })
}
