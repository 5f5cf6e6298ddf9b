use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangle in a 2-plane of input space.
///
/// Window coordinates `(a, b)` map to `origin + a * u + b * v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub origin: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub a_range: [f64; 2],
    pub b_range: [f64; 2],
}

impl Window {
    /// `[-1, 1]^2` spanned by the first two coordinate axes.
    pub fn square(input_dim: usize) -> Self {
        Self::axes(input_dim, [-1.0, 1.0], [-1.0, 1.0])
    }

    pub fn axes(input_dim: usize, a_range: [f64; 2], b_range: [f64; 2]) -> Self {
        let mut u = vec![0.0; input_dim];
        let mut v = vec![0.0; input_dim];
        if input_dim >= 2 {
            u[0] = 1.0;
            v[1] = 1.0;
        }
        Self {
            origin: vec![0.0; input_dim],
            u,
            v,
            a_range,
            b_range,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if input_dim < 2 {
            return Err(Error::invalid("a 2-D window needs input dimension >= 2"));
        }
        for (name, vec) in [("origin", &self.origin), ("u", &self.u), ("v", &self.v)] {
            if vec.len() != input_dim {
                return Err(Error::dims(format!("window {name}"), input_dim, vec.len()));
            }
            if vec.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("window {name} has non-finite entries")));
            }
        }
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        let (uu, vv, uv) = (dot(&self.u, &self.u), dot(&self.v, &self.v), dot(&self.u, &self.v));
        if uu == 0.0 || vv == 0.0 || uv * uv >= (1.0 - 1e-12) * uu * vv {
            return Err(Error::invalid("window basis vectors must be linearly independent"));
        }
        for (name, [lo, hi]) in [("a_range", self.a_range), ("b_range", self.b_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("window {name} must be finite and increasing")));
            }
        }
        Ok(())
    }

    /// Input points for window coordinates `(a_j, b)` for every `a_j`.
    pub(crate) fn row_points(&self, a: &[f64], b: f64) -> Array2<f64> {
        let base = Array1::from(self.origin.clone()) + b * &Array1::from(self.v.clone());
        let u = Array1::from(self.u.clone());
        let mut out = Array2::zeros((a.len(), self.dim()));
        for (mut row, &aj) in out.rows_mut().into_iter().zip(a) {
            row.assign(&(&base + aj * &u));
        }
        out
    }

    pub fn point(&self, a: f64, b: f64) -> Array1<f64> {
        self.row_points(&[a], b).row(0).to_owned()
    }
}

/// `n` equally spaced values from `lo` with spacing `(hi - lo) / n`
/// (`hi` itself excluded). Doubling `n` yields a superset.
pub(crate) fn lattice(range: [f64; 2], n: usize) -> Vec<f64> {
    let step = (range[1] - range[0]) / n as f64;
    (0..n).map(|i| range[0] + step * i as f64).collect()
}

/// `n` equally spaced values covering `[lo, hi]` inclusive.
pub(crate) fn closed_lattice(range: [f64; 2], n: usize) -> Vec<f64> {
    let step = (range[1] - range[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { range[1] } else { range[0] + step * i as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_window_is_axis_square() {
        let w = Window::square(3);
        w.validate(3).unwrap();
        assert_eq!(w.point(0.5, -0.25).to_vec(), vec![0.5, -0.25, 0.0]);
        assert!(w.validate(2).is_err());
        assert!(Window::square(1).validate(1).is_err());
    }

    #[test]
    fn dependent_basis_rejected() {
        let mut w = Window::square(2);
        w.v = vec![2.0, 0.0];
        assert!(w.validate(2).is_err());
        w.v = vec![0.0, 1.0];
        w.a_range = [1.0, 1.0];
        assert!(w.validate(2).is_err());
    }

    #[test]
    fn lattices() {
        assert_eq!(lattice([0.0, 1.0], 4), vec![0.0, 0.25, 0.5, 0.75]);
        let fine = lattice([-1.0, 1.0], 8);
        assert!(lattice([-1.0, 1.0], 4).iter().all(|x| fine.contains(x)));
        assert_eq!(closed_lattice([0.0, 1.0], 3), vec![0.0, 0.5, 1.0]);
    }
}
