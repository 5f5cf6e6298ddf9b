//! Random piecewise-linear networks and forward propagation.

mod activation;
pub mod format;
mod network;

pub use activation::{apply_activation, Activation, NeuronState};
pub use network::{Architecture, Dense, InitSpec, LayerCapture, Network};
