//! Trajectories through input space and the length of their images.

mod bound;
mod growth;
mod length;
pub(crate) mod refine;
mod trajectory;

pub use bound::{theorem1_bound, theorem1_factor, BoundSpec};
pub use growth::{growth_sweep, replica_trajectory, simulate_replica, GrowthConfig, GrowthStats, GrowthSweep};
pub use length::{layer_length_profile, LengthProfile};
pub use refine::{RefinePolicy, RefineStrategy};
pub(crate) use trajectory::segment_norm;
pub use trajectory::{arc_length, circular_interpolation, Trajectory, TrajectoryKind};
