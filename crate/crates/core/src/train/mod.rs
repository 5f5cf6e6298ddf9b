//! Datasets, backprop and layer-freezing training experiments.

mod backprop;
mod dataset;
mod trainer;

pub use backprop::{loss_and_correct, loss_and_gradients, loss_and_gradients_masked, Gradients, LayerGrad};
pub use dataset::{load_cifar10_binary, load_mnist_idx, Dataset, Split};
pub use trainer::{
    evaluate, probe_pairs, probe_trajectories, remaining_depth_experiment, train, Checkpoint, Probe, ProbeKind,
    RemainingDepthReport, SplitMetrics, TrainConfig, TrainRun,
};
