//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha20 stream keyed
//! by a 64-bit seed; independent consumers of the same seed use distinct
//! ChaCha stream ids so they never share numbers. Gaussians come from
//! `rand_distr`'s ziggurat sampler. Both algorithms are value-stable for a
//! pinned `rand_chacha`/`rand_distr` version, which is what
//! [`PRNG_ALGORITHM`] records in run metadata.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Identifier written into run manifests.
pub const PRNG_ALGORITHM: &str = "chacha20(rand_chacha-0.9)+ziggurat-normal(rand_distr-0.5)";

/// ChaCha stream ids; one per independent consumer of a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Network = 0,
    Trajectory = 1,
    Readout = 2,
    InputSet = 3,
    Shuffle = 4,
    Probe = 5,
    Resample = 6,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Seed of replica `index` under base seed `base`.
pub fn replica_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * std
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| gaussian(rng, std))
}

/// Row-major fill, so the draw order is fixed by the shape.
pub fn gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    std: f64,
) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| gaussian(rng, std))
}

/// Gaussian direction normalized to unit Euclidean norm.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Array1<f64> {
    loop {
        let v = gaussian_vec(rng, len, 1.0);
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}
