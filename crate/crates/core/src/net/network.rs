use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::activation::{Activation, NeuronState};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Shape of a fully connected network: `hidden_widths.len()` activated
/// layers followed by a linear readout of width `output_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl Architecture {
    /// `depth` hidden layers of width `width`.
    pub fn uniform(
        input_dim: usize,
        width: usize,
        depth: usize,
        output_dim: usize,
        activation: Activation,
    ) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![width; depth],
            output_dim,
            activation,
        }
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::invalid("input and output dims must be >= 1"));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::invalid("at least one hidden layer is required"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::invalid("hidden widths must be >= 1"));
        }
        Ok(())
    }
}

/// Variance scales and seed for a random draw of the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub sigma_w_sq: f64,
    pub sigma_b_sq: f64,
    pub seed: u64,
}

impl InitSpec {
    pub fn new(sigma_w_sq: f64, sigma_b_sq: f64, seed: u64) -> Self {
        Self {
            sigma_w_sq,
            sigma_b_sq,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w_sq.is_finite() && self.sigma_w_sq > 0.0) {
            return Err(Error::invalid("sigma_w_sq must be > 0"));
        }
        if !(self.sigma_b_sq.is_finite() && self.sigma_b_sq >= 0.0) {
            return Err(Error::invalid("sigma_b_sq must be >= 0"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Affine map `x -> W x + b` with `W` stored `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::dims("bias length vs weight rows", weights.nrows(), bias.len()));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self { weights, bias })
    }

    /// Weights ~ N(0, sigma_w_sq / fan_in), biases ~ N(0, sigma_b_sq).
    pub fn sample<R: rand::Rng + ?Sized>(
        rng: &mut R,
        fan_in: usize,
        fan_out: usize,
        sigma_w_sq: f64,
        sigma_b_sq: f64,
    ) -> Self {
        let w_std = (sigma_w_sq / fan_in as f64).sqrt();
        let weights = rng::gaussian_matrix(rng, fan_out, fan_in, w_std);
        let bias = if sigma_b_sq == 0.0 {
            Array1::zeros(fan_out)
        } else {
            rng::gaussian_vec(rng, fan_out, sigma_b_sq.sqrt())
        };
        Self { weights, bias }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weights.dot(&x) + &self.bias
    }

    /// Rows of `x` are points.
    pub fn apply_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights.t()) + &self.bias
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-layer record of one forward pass through the hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCapture {
    pub pre_activations: Vec<Array1<f64>>,
    pub activations: Vec<Array1<f64>>,
    pub states: Vec<Vec<NeuronState>>,
    /// Readout output, when the network has one.
    pub output: Option<Array1<f64>>,
}

/// Hidden layers with a shared activation, plus an optional linear readout.
///
/// Immutable once built; experiments that train clone it first.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    hidden: Vec<Dense>,
    readout: Option<Dense>,
    activation: Activation,
    init: Option<InitSpec>,
}

impl Network {
    /// Draws every layer, readout included, from `init`. Layers are drawn in
    /// order from a single stream, so the result depends only on `(arch, init)`.
    pub fn sample(arch: &Architecture, init: &InitSpec) -> Result<Self> {
        arch.validate()?;
        init.validate()?;
        let mut rng = rng::stream(init.seed, Stream::Network);
        let mut fan_in = arch.input_dim;
        let mut hidden = Vec::with_capacity(arch.depth());
        for &width in &arch.hidden_widths {
            hidden.push(Dense::sample(&mut rng, fan_in, width, init.sigma_w_sq, init.sigma_b_sq));
            fan_in = width;
        }
        let readout = Dense::sample(&mut rng, fan_in, arch.output_dim, init.sigma_w_sq, init.sigma_b_sq);
        Ok(Self {
            hidden,
            readout: Some(readout),
            activation: arch.activation,
            init: Some(*init),
        })
    }

    /// Network with exactly the given hidden layers and no readout.
    pub fn from_explicit(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != biases.len() {
            return Err(Error::dims("bias vectors vs weight matrices", weights.len(), biases.len()));
        }
        let layers = weights
            .into_iter()
            .zip(biases)
            .map(|(w, b)| Dense::new(w, b))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers, None, activation)
    }

    pub fn from_layers(hidden: Vec<Dense>, readout: Option<Dense>, activation: Activation) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::invalid("at least one hidden layer is required"));
        }
        for (d, pair) in hidden.windows(2).enumerate() {
            if pair[1].fan_in() != pair[0].fan_out() {
                return Err(Error::dims(
                    format!("fan_in of layer {}", d + 2),
                    pair[0].fan_out(),
                    pair[1].fan_in(),
                ));
            }
        }
        if let Some(r) = &readout {
            let last = hidden.last().map(Dense::fan_out).unwrap_or_default();
            if r.fan_in() != last {
                return Err(Error::dims("readout fan_in", last, r.fan_in()));
            }
        }
        Ok(Self {
            hidden,
            readout,
            activation,
            init: None,
        })
    }

    pub fn with_readout(mut self, readout: Dense) -> Result<Self> {
        let last = self.hidden.last().map(Dense::fan_out).unwrap_or_default();
        if readout.fan_in() != last {
            return Err(Error::dims("readout fan_in", last, readout.fan_in()));
        }
        self.readout = Some(readout);
        Ok(self)
    }

    pub fn without_readout(mut self) -> Self {
        self.readout = None;
        self
    }

    pub(crate) fn with_init(mut self, init: Option<InitSpec>) -> Self {
        self.init = init;
        self
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Seed and variances the parameters were drawn from, if sampled.
    pub fn init(&self) -> Option<&InitSpec> {
        self.init.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.hidden[0].fan_in()
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden.iter().map(Dense::fan_out).collect()
    }

    pub fn hidden_layers(&self) -> &[Dense] {
        &self.hidden
    }

    pub fn readout(&self) -> Option<&Dense> {
        self.readout.as_ref()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim(),
            hidden_widths: self.hidden_widths(),
            output_dim: self.readout.as_ref().map(Dense::fan_out).unwrap_or(0),
            activation: self.activation,
        }
    }

    /// Hidden layers followed by the readout, in forward order.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain(self.readout.iter())
    }

    pub(crate) fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden.iter_mut().chain(self.readout.iter_mut())
    }

    /// Number of parameterized layers, readout included.
    pub fn num_layers(&self) -> usize {
        self.hidden.len() + usize::from(self.readout.is_some())
    }

    /// Sub-network made of hidden layers `range` (0-based), without readout.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.depth() {
            return Err(Error::invalid(format!(
                "layer range {range:?} outside 0..{}",
                self.depth()
            )));
        }
        Self::from_layers(self.hidden[range].to_vec(), None, self.activation)
    }

    /// Replaces hidden layer `index` (0-based). Dimensions must match.
    pub fn replace_hidden(&mut self, index: usize, layer: Dense) -> Result<()> {
        let old = self
            .hidden
            .get(index)
            .ok_or_else(|| Error::invalid(format!("no hidden layer {index}")))?;
        if old.weights.dim() != layer.weights.dim() || old.bias.len() != layer.bias.len() {
            return Err(Error::dims("replacement layer fan_out", old.fan_out(), layer.fan_out()));
        }
        self.hidden[index] = layer;
        self.init = None;
        Ok(())
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::dims("input vector", self.input_dim(), len));
        }
        Ok(())
    }

    pub fn forward_capture(&self, x: ArrayView1<f64>) -> Result<LayerCapture> {
        self.check_input(x.len())?;
        let depth = self.depth();
        let mut capture = LayerCapture {
            pre_activations: Vec::with_capacity(depth),
            activations: Vec::with_capacity(depth),
            states: Vec::with_capacity(depth),
            output: None,
        };
        let mut current = x.to_owned();
        for (d, layer) in self.hidden.iter().enumerate() {
            let h = layer.apply(current.view());
            if let Some(bad) = h.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    location: format!("pre-activation of layer {}", d + 1),
                    value: *bad,
                });
            }
            let z = h.mapv(|v| self.activation.apply(v));
            capture.states.push(h.iter().map(|&v| self.activation.state(v)).collect());
            capture.pre_activations.push(h);
            capture.activations.push(z.clone());
            current = z;
        }
        if let Some(r) = &self.readout {
            capture.output = Some(r.apply(current.view()));
        }
        Ok(capture)
    }

    /// Activation of the last hidden layer.
    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_input(x.len())?;
        let mut current = x.to_owned();
        for layer in &self.hidden {
            current = layer.apply(current.view()).mapv_into(|v| self.activation.apply(v));
        }
        Ok(current)
    }

    /// Readout applied to the last hidden activation.
    pub fn logits(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let z = self.forward(x)?;
        let r = self
            .readout
            .as_ref()
            .ok_or_else(|| Error::invalid("network has no readout layer"))?;
        Ok(r.apply(z.view()))
    }

    /// Pre-activations of every hidden layer for a batch of points (rows).
    pub fn pre_activations_batch(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        self.check_input(x.ncols())?;
        let mut out = Vec::with_capacity(self.depth());
        let mut current: Option<Array2<f64>> = None;
        for layer in &self.hidden {
            let h = match &current {
                None => layer.apply_batch(x),
                Some(z) => layer.apply_batch(z.view()),
            };
            current = Some(h.mapv(|v| self.activation.apply(v)));
            out.push(h);
        }
        Ok(out)
    }

    /// Hidden activations per layer for a batch, plus the readout output
    /// when present.
    pub fn activations_batch(&self, x: ArrayView2<f64>) -> Result<(Vec<Array2<f64>>, Option<Array2<f64>>)> {
        self.check_input(x.ncols())?;
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.depth());
        for layer in &self.hidden {
            let h = match acts.last() {
                None => layer.apply_batch(x),
                Some(z) => layer.apply_batch(z.view()),
            };
            acts.push(h.mapv_into(|v| self.activation.apply(v)));
        }
        let out = self
            .readout
            .as_ref()
            .map(|r| r.apply_batch(acts.last().expect("non-empty").view()));
        Ok((acts, out))
    }

    /// Readout output for a batch of points.
    pub fn logits_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let (_, out) = self.activations_batch(x)?;
        out.ok_or_else(|| Error::invalid("network has no readout layer"))
    }

    /// `true` when every entry of every layer is finite.
    pub fn is_finite(&self) -> bool {
        self.layers()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
