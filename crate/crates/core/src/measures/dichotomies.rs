//! Distinct sign labelings of a fixed input set under weight resampling.

use std::collections::HashSet;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Architecture, Dense, InitSpec, Network};
use crate::par::{map_indexed, Parallelism};
use crate::rng::{self, replica_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Every sample is an independent network.
    AllWeights,
    /// One base network; each sample redraws hidden layer `d` (1-based) only.
    Layer(usize),
}

impl SweepMode {
    pub fn layer(self) -> Option<usize> {
        match self {
            SweepMode::AllWeights => None,
            SweepMode::Layer(d) => Some(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub mode: SweepMode,
    pub s: usize,
    pub samples: usize,
    pub distinct: usize,
    /// (sample, point) pairs whose readout was exactly zero; labelled positive.
    pub ties: usize,
}

/// `s` points drawn i.i.d. uniformly on the unit sphere of `R^m`.
pub fn sphere_inputs(s: usize, m: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng::stream(seed, Stream::InputSet);
    let mut out = Array2::zeros((s, m));
    for mut row in out.rows_mut() {
        row.assign(&rng::unit_vector(&mut rng, m));
    }
    out
}

/// Scalar readout shared by every sample of one experiment.
fn draw_readout(width: usize, init: &InitSpec) -> Dense {
    let mut rng = rng::stream(init.seed, Stream::Readout);
    Dense::sample(&mut rng, width, 1, init.sigma_w_sq, init.sigma_b_sq)
}

/// Packed labels plus the number of exact ties.
fn labels(readout: &Dense, z: ArrayView2<f64>) -> (Vec<u64>, usize) {
    let y = readout.apply_batch(z);
    let mut words = vec![0u64; z.nrows().div_ceil(64)];
    let mut ties = 0;
    for (i, &v) in y.column(0).iter().enumerate() {
        ties += usize::from(v == 0.0);
        if v >= 0.0 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    (words, ties)
}

fn forward_layers(layers: &[Dense], act: crate::net::Activation, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.to_owned();
    for l in layers {
        z = l.apply_batch(z.view()).mapv_into(|v| act.apply(v));
    }
    z
}

fn check_inputs(arch: &Architecture, inputs: ArrayView2<f64>) -> Result<()> {
    if inputs.nrows() == 0 {
        return Err(Error::invalid("input set must be non-empty"));
    }
    if inputs.ncols() != arch.input_dim {
        return Err(Error::dims("input set dimension", arch.input_dim, inputs.ncols()));
    }
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input set has non-finite entries"));
    }
    let rows: HashSet<Vec<u64>> = inputs.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    if rows.len() != inputs.nrows() {
        return Err(Error::invalid("input set points must be distinct"));
    }
    Ok(())
}

/// Counts distinct labelings of `inputs` (one point per row) by the sign of
/// a fixed scalar readout of the last hidden layer.
///
/// Sample `i` draws its weights from seed `init.seed ^ i`, so the first `n`
/// samples are the same whatever `samples` is. In `Layer(d)` mode the base
/// network comes from `init.seed` and the prefix below layer `d` is
/// evaluated once.
pub fn count_dichotomies(
    arch: &Architecture,
    init: &InitSpec,
    inputs: ArrayView2<f64>,
    samples: usize,
    mode: SweepMode,
    par: Parallelism,
) -> Result<DichotomyReport> {
    arch.validate()?;
    init.validate()?;
    check_inputs(arch, inputs)?;
    if samples == 0 {
        return Err(Error::invalid("samples must be >= 1"));
    }
    let depth = arch.depth();
    let act = arch.activation;
    let readout = draw_readout(*arch.hidden_widths.last().expect("validated"), init);
    let hidden_only = Architecture {
        output_dim: 1,
        ..arch.clone()
    };

    let results: Vec<(Vec<u64>, usize)> = match mode {
        SweepMode::AllWeights => map_indexed(par, samples, |i| -> Result<_> {
            let net = Network::sample(&hidden_only, &init.with_seed(replica_seed(init.seed, i as u64)))?;
            Ok(labels(&readout, forward_layers(net.hidden_layers(), act, inputs).view()))
        })
        .into_iter()
        .collect::<Result<_>>()?,
        SweepMode::Layer(d) => {
            if d == 0 || d > depth {
                return Err(Error::invalid(format!("sweep layer {d} outside 1..={depth}")));
            }
            let base = Network::sample(&hidden_only, init)?;
            let layers = base.hidden_layers();
            let below = forward_layers(&layers[..d - 1], act, inputs);
            let fan_in = layers[d - 1].fan_in();
            let fan_out = layers[d - 1].fan_out();
            map_indexed(par, samples, |i| {
                let mut rng = rng::stream(replica_seed(init.seed, i as u64), Stream::Resample);
                let fresh = Dense::sample(&mut rng, fan_in, fan_out, init.sigma_w_sq, init.sigma_b_sq);
                let z = forward_layers(std::slice::from_ref(&fresh), act, below.view());
                labels(&readout, forward_layers(&layers[d..], act, z.view()).view())
            })
        }
    };

    let mut seen = HashSet::new();
    let mut ties = 0;
    for (words, t) in results {
        ties += t;
        seen.insert(words);
    }
    Ok(DichotomyReport {
        mode,
        s: inputs.nrows(),
        samples,
        distinct: seen.len(),
        ties,
    })
}
