//! Global activation patterns.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::net::{Network, NeuronState};

/// States of every hidden neuron, layer after layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationPattern {
    states: Vec<NeuronState>,
    /// `offsets[d]..offsets[d + 1]` indexes layer `d + 1`.
    offsets: Vec<usize>,
}

impl ActivationPattern {
    pub fn from_layers(layers: Vec<Vec<NeuronState>>) -> Self {
        let mut offsets = vec![0];
        let mut states = Vec::new();
        for l in layers {
            states.extend(l);
            offsets.push(states.len());
        }
        Self { states, offsets }
    }

    pub fn states(&self) -> &[NeuronState] {
        &self.states
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn depth(&self) -> usize {
        self.offsets.len() - 1
    }

    /// States of hidden layer `d` (1-based).
    pub fn layer(&self, d: usize) -> &[NeuronState] {
        &self.states[self.offsets[d - 1]..self.offsets[d]]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn activation_pattern(net: &Network, x: ArrayView1<f64>) -> Result<ActivationPattern> {
    Ok(ActivationPattern::from_layers(net.forward_capture(x)?.states))
}
