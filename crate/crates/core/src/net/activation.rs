use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear nonlinearity applied on every hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    HardTanh,
    #[serde(rename = "relu")]
    ReLU,
}

impl Activation {
    #[inline]
    pub fn apply(self, h: f64) -> f64 {
        match self {
            Activation::HardTanh => h.clamp(-1.0, 1.0),
            Activation::ReLU => h.max(0.0),
        }
    }

    /// Subgradient used by backprop: 1 strictly inside the linear piece, 0 elsewhere.
    #[inline]
    pub fn derivative(self, h: f64) -> f64 {
        match self {
            Activation::HardTanh => {
                if h > -1.0 && h < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::ReLU => {
                if h > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Boundary values are assigned to the saturated / inactive side.
    #[inline]
    pub fn state(self, h: f64) -> NeuronState {
        match self {
            Activation::HardTanh => {
                if h <= -1.0 {
                    NeuronState::SatLow
                } else if h >= 1.0 {
                    NeuronState::SatHigh
                } else {
                    NeuronState::Linear
                }
            }
            Activation::ReLU => {
                if h > 0.0 {
                    NeuronState::Active
                } else {
                    NeuronState::Inactive
                }
            }
        }
    }

    /// Pre-activation values at which the neuron changes state.
    pub fn level_values(self) -> &'static [f64] {
        match self {
            Activation::HardTanh => &[-1.0, 1.0],
            Activation::ReLU => &[0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::HardTanh => "hardtanh",
            Activation::ReLU => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hardtanh" | "hard-tanh" | "hard_tanh" => Ok(Activation::HardTanh),
            "relu" => Ok(Activation::ReLU),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Discrete state of one neuron for one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NeuronState {
    SatLow,
    Linear,
    SatHigh,
    Inactive,
    Active,
}

impl NeuronState {
    /// Position along the pre-activation axis; adjacent states differ by one
    /// boundary crossing.
    pub fn rank(self) -> u8 {
        match self {
            NeuronState::SatLow | NeuronState::Inactive => 0,
            NeuronState::Linear | NeuronState::Active => 1,
            NeuronState::SatHigh => 2,
        }
    }
}

/// Checked scalar activation; rejects NaN and infinities.
pub fn apply_activation(kind: Activation, h: f64) -> Result<f64> {
    if !h.is_finite() {
        return Err(Error::NonFinite {
            location: "activation input".into(),
            value: h,
        });
    }
    Ok(kind.apply(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_examples() {
        assert_eq!(apply_activation(Activation::HardTanh, 0.5).unwrap(), 0.5);
        assert_eq!(apply_activation(Activation::HardTanh, 2.0).unwrap(), 1.0);
        assert_eq!(apply_activation(Activation::ReLU, -3.0).unwrap(), 0.0);
        assert!(apply_activation(Activation::ReLU, f64::NAN).is_err());
        assert!(apply_activation(Activation::HardTanh, f64::INFINITY).is_err());
    }

    #[test]
    fn boundaries_go_to_saturated_side() {
        assert_eq!(Activation::HardTanh.state(1.0), NeuronState::SatHigh);
        assert_eq!(Activation::HardTanh.state(-1.0), NeuronState::SatLow);
        assert_eq!(Activation::ReLU.state(0.0), NeuronState::Inactive);
        assert_eq!(Activation::HardTanh.state(2.0), NeuronState::SatHigh);
        assert_eq!(Activation::HardTanh.state(0.3), NeuronState::Linear);
        assert_eq!(Activation::HardTanh.state(-5.0), NeuronState::SatLow);
    }

    proptest! {
        #[test]
        fn ranges_and_state_consistency(h in -1e6f64..1e6) {
            let t = Activation::HardTanh.apply(h);
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert_eq!(Activation::HardTanh.state(h) == NeuronState::SatHigh, t == 1.0);
            prop_assert_eq!(Activation::HardTanh.state(h) == NeuronState::SatLow, t == -1.0);
            let r = Activation::ReLU.apply(h);
            prop_assert!(r >= 0.0);
            if h < 0.0 {
                prop_assert_eq!(Activation::ReLU.state(h), NeuronState::Inactive);
                prop_assert_eq!(r, 0.0);
            }
        }
    }
}
