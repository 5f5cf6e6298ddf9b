use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-layer growth factor of the trajectory-length lower bound for a
/// hard-tanh network of width `k` with weight std `sigma_w` and bias std
/// `sigma_b`:
///
/// `g = sigma_w / (sigma_w^2 + sigma_b^2)^(1/4) * sqrt(k) / sqrt(sqrt(sigma_w^2 + sigma_b^2) + k)`
///
/// The bound holds up to a multiplicative constant, which is taken as 1.
pub fn theorem1_factor(k: usize, sigma_w: f64, sigma_b: f64) -> f64 {
    let s2 = sigma_w * sigma_w + sigma_b * sigma_b;
    let k = k as f64;
    sigma_w / s2.powf(0.25) * (k / (s2.sqrt() + k)).sqrt()
}

/// `g^d`: the lower bound on `E[l(z^(d))] / l(x)`.
pub fn theorem1_bound(k: usize, sigma_w: f64, sigma_b: f64, depth: usize) -> f64 {
    theorem1_factor(k, sigma_w, sigma_b).powi(depth as i32)
}

/// Evaluated bound with the inputs it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub k: usize,
    pub sigma_w: f64,
    pub sigma_b: f64,
    pub depth: usize,
    pub per_layer_factor: f64,
    pub bound_value: f64,
}

impl BoundSpec {
    /// Multiplicative constant assumed for the asymptotic bound.
    pub const CONSTANT: f64 = 1.0;

    pub fn new(k: usize, sigma_w: f64, sigma_b: f64, depth: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if !(sigma_w > 0.0 && sigma_w.is_finite()) {
            return Err(Error::invalid("sigma_w must be > 0"));
        }
        if !(sigma_b >= 0.0 && sigma_b.is_finite()) {
            return Err(Error::invalid("sigma_b must be >= 0"));
        }
        let g = theorem1_factor(k, sigma_w, sigma_b);
        Ok(Self {
            k,
            sigma_w,
            sigma_b,
            depth,
            per_layer_factor: g,
            bound_value: Self::CONSTANT * g.powi(depth as i32),
        })
    }

    /// Same bound from variances instead of standard deviations.
    pub fn from_variances(k: usize, sigma_w_sq: f64, sigma_b_sq: f64, depth: usize) -> Result<Self> {
        if sigma_w_sq < 0.0 || sigma_b_sq < 0.0 {
            return Err(Error::invalid("variances must be non-negative"));
        }
        Self::new(k, sigma_w_sq.sqrt(), sigma_b_sq.sqrt(), depth)
    }
}
