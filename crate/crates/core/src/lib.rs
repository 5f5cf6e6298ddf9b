//! Expressivity measurements for deep piecewise-linear networks.
//!
//! * [`net`]: random hard-tanh / ReLU networks and forward propagation.
//! * [`traj`]: trajectories, per-layer arc length, growth sweeps and the
//!   per-layer growth lower bound.
//! * [`measures`]: transitions, activation patterns and regions, boundary
//!   contours, dichotomies.
//! * [`train`]: datasets, backprop, layer-freezing training experiments.
//!
//! All randomness is seeded (see [`rng`]) and every parallel loop reduces in
//! a fixed order, so results are bit-identical across runs and thread counts.

pub mod error;
pub mod measures;
pub mod net;
pub mod par;
pub mod rng;
pub mod stats;
pub mod traj;
pub mod train;

pub use error::{Error, Result};
