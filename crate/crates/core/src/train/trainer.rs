//! Minibatch SGD with per-layer freezing and trajectory probes.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::backprop::{loss_and_correct, loss_and_gradients_masked};
use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::net::{Architecture, Dense, InitSpec, Network};
use crate::par::{map_slice, Parallelism};
use crate::rng::{self, Stream};
use crate::traj::{layer_length_profile, LengthProfile, RefinePolicy, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub init: InitSpec,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// One entry per layer of [`Network::layers`]: hidden layers, then the
    /// readout. `true` = frozen.
    pub freeze_mask: Vec<bool>,
    pub checkpoint_every: usize,
    /// Use only the first `n` training examples.
    pub data_subset: Option<usize>,
    /// Shuffling and random-probe seed.
    pub seed: u64,
    /// Start the readout at zero instead of sampling it.
    pub zero_readout: bool,
    pub probe_refine: RefinePolicy,
}

impl TrainConfig {
    /// Depth 6, width 100, lr 0.05, batch 64, 3000 steps, checkpoints every
    /// 300 steps, 10k examples, sigma_b^2 = 0.01, nothing frozen.
    pub fn defaults(input_dim: usize, classes: usize, sigma_w_sq: f64, seed: u64) -> Self {
        let arch = Architecture::uniform(input_dim, 100, 6, classes, crate::net::Activation::HardTanh);
        Self {
            freeze_mask: vec![false; arch.depth() + 1],
            arch,
            init: InitSpec::new(sigma_w_sq, 0.01, seed),
            learning_rate: 0.05,
            batch_size: 64,
            steps: 3000,
            checkpoint_every: 300,
            data_subset: Some(10_000),
            seed,
            zero_readout: false,
            probe_refine: RefinePolicy::default(),
        }
    }

    /// Freezes every layer except `layer` (1-based over hidden layers;
    /// `depth + 1` is the readout).
    pub fn train_only(mut self, layer: usize) -> Self {
        self.freeze_mask = (1..=self.arch.depth() + 1).map(|l| l != layer).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.init.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.steps == 0 || self.checkpoint_every == 0 {
            return Err(Error::invalid("batch_size, steps and checkpoint_every must be >= 1"));
        }
        if self.checkpoint_every > self.steps {
            return Err(Error::invalid("checkpoint_every must not exceed steps"));
        }
        if self.freeze_mask.len() != self.arch.depth() + 1 {
            return Err(Error::dims("freeze_mask", self.arch.depth() + 1, self.freeze_mask.len()));
        }
        if self.freeze_mask.iter().all(|&f| f) {
            return Err(Error::invalid("at least one layer must be trainable"));
        }
        if self.data_subset == Some(0) {
            return Err(Error::invalid("data_subset must be >= 1"));
        }
        self.probe_refine.validate()
    }

    /// The network training starts from.
    pub fn initial_network(&self) -> Result<Network> {
        let net = Network::sample(&self.arch, &self.init)?;
        if !self.zero_readout {
            return Ok(net);
        }
        let r = net.readout().expect("classifier has a readout");
        let zero = Dense::new(Array2::zeros(r.weights.dim()), Array1::zeros(r.bias.len()))?;
        net.without_readout().with_readout(zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    /// Arc between two test images.
    Data,
    /// Arc between two Gaussian points with the pixel statistics of the data.
    Random,
}

impl ProbeKind {
    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::Data => "data",
            ProbeKind::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub kind: ProbeKind,
    pub trajectory: Trajectory,
}

/// The two probes of a run: the first two test images with different labels,
/// and a pair of Gaussian points from `seed` whose coordinates share the test
/// set's overall pixel mean and standard deviation.
pub fn probe_pairs(test: &Dataset, seed: u64) -> Result<[Probe; 2]> {
    let first = 0;
    let second = (1..test.len())
        .find(|&i| test.labels[i] != test.labels[first])
        .ok_or_else(|| Error::invalid("probe needs two test examples of different classes"))?;
    let (x0, x1) = (test.inputs.row(first).to_owned(), test.inputs.row(second).to_owned());
    let mean = test.inputs.mean().unwrap_or(0.0);
    let std = test.inputs.std(0.0);
    if std <= 0.0 {
        return Err(Error::invalid("probe needs test inputs with nonzero spread"));
    }
    let mut rng = rng::stream(seed, Stream::Probe);
    let r0 = rng::gaussian_vec(&mut rng, test.dim(), std) + mean;
    let r1 = rng::gaussian_vec(&mut rng, test.dim(), std) + mean;
    Ok([
        Probe {
            kind: ProbeKind::Data,
            trajectory: Trajectory::circular(x0, x1, 2)?,
        },
        Probe {
            kind: ProbeKind::Random,
            trajectory: Trajectory::circular(r0, r1, 2)?,
        },
    ])
}

/// Hidden-layer length profiles of both probes.
pub fn probe_trajectories(net: &Network, probes: &[Probe], refine: &RefinePolicy) -> Result<Vec<(ProbeKind, LengthProfile)>> {
    probes
        .iter()
        .map(|p| Ok((p.kind, layer_length_profile(net, &p.trajectory, refine, false)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: Split,
    pub accuracy: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub train: SplitMetrics,
    pub test: SplitMetrics,
    pub probes: Vec<(ProbeKind, LengthProfile)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub checkpoints: Vec<Checkpoint>,
    pub network: Network,
    /// Step and loss value at which training stopped on a non-finite loss.
    pub diverged: Option<(usize, f64)>,
}

const EVAL_CHUNK: usize = 2048;

/// Accuracy and mean loss over a whole dataset.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<SplitMetrics> {
    let mut loss = 0.0;
    let mut correct = 0;
    let mut start = 0;
    while start < data.len() {
        let end = (start + EVAL_CHUNK).min(data.len());
        let (l, c) = loss_and_correct(
            net,
            data.inputs.slice(ndarray::s![start..end, ..]),
            &data.labels[start..end],
        )?;
        loss += l * (end - start) as f64;
        correct += c;
        start = end;
    }
    Ok(SplitMetrics {
        split: data.split,
        accuracy: correct as f64 / data.len() as f64,
        loss: loss / data.len() as f64,
    })
}

fn checkpoint(net: &Network, step: usize, train: &Dataset, test: &Dataset, probes: &[Probe], refine: &RefinePolicy) -> Result<Checkpoint> {
    Ok(Checkpoint {
        step,
        train: evaluate(net, train)?,
        test: evaluate(net, test)?,
        probes: probe_trajectories(net, probes, refine)?,
    })
}

/// Plain SGD on the unfrozen layers.
///
/// Each epoch visits a fresh permutation of the (subset) training set drawn
/// from `config.seed`; a trailing partial batch is dropped. Checkpoints are
/// taken at step 0, every `checkpoint_every` steps, and after the last step.
pub fn train(config: &TrainConfig, train_set: &Dataset, test_set: &Dataset) -> Result<TrainRun> {
    config.validate()?;
    let data = match config.data_subset {
        Some(n) => train_set.head(n),
        None => train_set.clone(),
    };
    if data.dim() != config.arch.input_dim || test_set.dim() != config.arch.input_dim {
        return Err(Error::dims("dataset input dimension", config.arch.input_dim, data.dim()));
    }
    if data.classes != config.arch.output_dim {
        return Err(Error::dims("number of classes", config.arch.output_dim, data.classes));
    }
    if data.len() < config.batch_size {
        return Err(Error::invalid("training set is smaller than one batch"));
    }
    let probes = probe_pairs(test_set, config.seed)?;
    let mut net = config.initial_network()?;
    let wanted: Vec<bool> = config.freeze_mask.iter().map(|f| !f).collect();
    let mut checkpoints = vec![checkpoint(&net, 0, &data, test_set, &probes, &config.probe_refine)?];

    let mut shuffle = rng::stream(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches_per_epoch = data.len() / config.batch_size;
    let mut diverged = None;
    for step in 1..=config.steps {
        let slot = (step - 1) % batches_per_epoch;
        if slot == 0 {
            order.shuffle(&mut shuffle);
        }
        let idx = &order[slot * config.batch_size..(slot + 1) * config.batch_size];
        let x = data.inputs.select(Axis(0), idx);
        let y: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
        let grads = match loss_and_gradients_masked(&net, x.view(), &y, &wanted) {
            Ok((_, g)) => g,
            Err(Error::NonFinite { value, .. }) => {
                diverged = Some((step, value));
                break;
            }
            Err(e) => return Err(e),
        };
        for (layer, g) in net.layers_mut().zip(&grads.layers) {
            if let Some(g) = g {
                layer.weights.scaled_add(-config.learning_rate, &g.weights);
                layer.bias.scaled_add(-config.learning_rate, &g.bias);
            }
        }
        if !net.is_finite() {
            diverged = Some((step, f64::NAN));
            break;
        }
        if step % config.checkpoint_every == 0 || step == config.steps {
            checkpoints.push(checkpoint(&net, step, &data, test_set, &probes, &config.probe_refine)?);
        }
    }
    Ok(TrainRun {
        config: config.clone(),
        checkpoints,
        network: net.with_init(None),
        diverged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemainingDepthReport {
    /// Metrics of the untrained shared initial network.
    pub baseline_train: SplitMetrics,
    pub baseline_test: SplitMetrics,
    pub initial_network: Network,
    /// `(trained layer, run)` in the order requested.
    pub runs: Vec<(usize, TrainRun)>,
}

/// Trains the same initial network once per entry of `layers`, each time
/// with only that layer unfrozen (1-based; `depth + 1` is the readout).
pub fn remaining_depth_experiment(
    base: &TrainConfig,
    layers: &[usize],
    train_set: &Dataset,
    test_set: &Dataset,
    par: Parallelism,
) -> Result<RemainingDepthReport> {
    let depth = base.arch.depth();
    if layers.is_empty() {
        return Err(Error::invalid("no layers to train"));
    }
    if let Some(bad) = layers.iter().find(|&&l| l == 0 || l > depth + 1) {
        return Err(Error::invalid(format!("layer {bad} outside 1..={}", depth + 1)));
    }
    let initial_network = base.initial_network()?;
    let data = match base.data_subset {
        Some(n) => train_set.head(n),
        None => train_set.clone(),
    };
    let runs = map_slice(par, layers, |&l| train(&base.clone().train_only(l), train_set, test_set).map(|r| (l, r)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(RemainingDepthReport {
        baseline_train: evaluate(&initial_network, &data)?,
        baseline_test: evaluate(&initial_network, test_set)?,
        initial_network,
        runs,
    })
}
