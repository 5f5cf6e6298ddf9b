use std::f64::consts::FRAC_PI_2;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Circular,
    Segment,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
enum Curve {
    /// `cos(t) x0 + sin(t) x1`, t in [0, pi/2].
    Circular { x0: Array1<f64>, x1: Array1<f64> },
    /// `(1 - t) a + t b`, t in [0, 1].
    Segment { a: Array1<f64>, b: Array1<f64> },
    /// Piecewise-linear interpolant through the given knots.
    Polyline { knots: Vec<f64>, points: Array2<f64> },
}

/// A 1-D curve in input space together with a sampling of it.
///
/// The curve itself is kept so the sampling can be refined.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    params: Vec<f64>,
    points: Array2<f64>,
    curve: Curve,
}

fn uniform_params(start: f64, end: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { end } else { start + (end - start) * i as f64 / last })
        .collect()
}

impl Trajectory {
    /// Quarter great-circle arc from `x0` (t = 0) to `x1` (t = pi/2).
    pub fn circular(x0: Array1<f64>, x1: Array1<f64>, num_points: usize) -> Result<Self> {
        if x0.len() != x1.len() {
            return Err(Error::dims("circular endpoint", x0.len(), x1.len()));
        }
        if num_points < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 points"));
        }
        let n0 = x0.dot(&x0).sqrt();
        let n1 = x1.dot(&x1).sqrt();
        if n0 == 0.0 || n1 == 0.0 {
            return Err(Error::DegenerateTrajectory("zero endpoint".into()));
        }
        let cos = x0.dot(&x1) / (n0 * n1);
        if !cos.is_finite() || cos.abs() > 1.0 - 1e-12 {
            return Err(Error::DegenerateTrajectory("endpoints are parallel".into()));
        }
        Ok(Self::build(Curve::Circular { x0, x1 }, uniform_params(0.0, FRAC_PI_2, num_points)))
    }

    /// Straight segment from `a` (t = 0) to `b` (t = 1).
    pub fn segment(a: Array1<f64>, b: Array1<f64>, num_points: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::dims("segment endpoint", a.len(), b.len()));
        }
        if num_points < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 points"));
        }
        Ok(Self::build(Curve::Segment { a, b }, uniform_params(0.0, 1.0, num_points)))
    }

    /// Arbitrary polyline; refinement interpolates linearly between knots.
    pub fn custom(params: Vec<f64>, points: Array2<f64>) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 points"));
        }
        if params.len() != points.nrows() {
            return Err(Error::dims("trajectory points", params.len(), points.nrows()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("trajectory parameters must be strictly increasing"));
        }
        Ok(Self {
            params: params.clone(),
            points: points.clone(),
            curve: Curve::Polyline { knots: params, points },
        })
    }

    fn build(curve: Curve, params: Vec<f64>) -> Self {
        let mut traj = Self {
            points: Array2::zeros((0, 0)),
            params,
            curve,
        };
        traj.points = traj.points_at(&traj.params);
        traj
    }

    pub fn kind(&self) -> TrajectoryKind {
        match self.curve {
            Curve::Circular { .. } => TrajectoryKind::Circular,
            Curve::Segment { .. } => TrajectoryKind::Segment,
            Curve::Polyline { .. } => TrajectoryKind::Custom,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn dim(&self) -> usize {
        match &self.curve {
            Curve::Circular { x0, .. } => x0.len(),
            Curve::Segment { a, .. } => a.len(),
            Curve::Polyline { points, .. } => points.ncols(),
        }
    }

    pub fn t_start(&self) -> f64 {
        self.params[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.params.last().expect("at least two params")
    }

    /// Evaluates the underlying curve at each parameter (one row per t).
    pub fn points_at(&self, ts: &[f64]) -> Array2<f64> {
        let dim = self.dim();
        let mut out = Array2::zeros((ts.len(), dim));
        for (mut row, &t) in out.axis_iter_mut(Axis(0)).zip(ts) {
            match &self.curve {
                Curve::Circular { x0, x1 } => {
                    let (s, c) = t.sin_cos();
                    row.assign(&(x0 * c));
                    row.scaled_add(s, x1);
                }
                Curve::Segment { a, b } => {
                    row.assign(&(a * (1.0 - t)));
                    row.scaled_add(t, b);
                }
                Curve::Polyline { knots, points } => {
                    let t = t.clamp(knots[0], knots[knots.len() - 1]);
                    let j = knots.partition_point(|&k| k <= t).clamp(1, knots.len() - 1);
                    let (t0, t1) = (knots[j - 1], knots[j]);
                    let w = (t - t0) / (t1 - t0);
                    row.assign(&(&points.row(j - 1) * (1.0 - w)));
                    row.scaled_add(w, &points.row(j));
                }
            }
        }
        out
    }

    /// Same curve, `num_points` uniform parameters over the same range.
    pub fn resampled(&self, num_points: usize) -> Result<Self> {
        if num_points < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 points"));
        }
        match &self.curve {
            Curve::Polyline { .. } => {
                let params = uniform_params(self.t_start(), self.t_end(), num_points);
                let points = self.points_at(&params);
                let mut t = Self::custom(params, points)?;
                t.curve = self.curve.clone();
                Ok(t)
            }
            curve => Ok(Self::build(
                curve.clone(),
                uniform_params(self.t_start(), self.t_end(), num_points),
            )),
        }
    }

    /// Polyline length of the stored samples.
    pub fn sampled_length(&self) -> f64 {
        arc_length(self.points.view())
    }
}

/// Sum of Euclidean distances between consecutive rows.
pub fn arc_length(points: ArrayView2<f64>) -> f64 {
    points
        .axis_windows(Axis(0), 2)
        .into_iter()
        .map(|w| segment_norm(w.row(0).iter(), w.row(1).iter()))
        .sum()
}

#[inline]
pub(crate) fn segment_norm<'a>(
    a: impl Iterator<Item = &'a f64>,
    b: impl Iterator<Item = &'a f64>,
) -> f64 {
    a.zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt()
}

/// [`Trajectory::circular`] under its conventional name.
pub fn circular_interpolation(x0: Array1<f64>, x1: Array1<f64>, num_points: usize) -> Result<Trajectory> {
    Trajectory::circular(x0, x1, num_points)
}
