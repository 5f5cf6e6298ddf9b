//! Transitions, activation patterns and regions, boundaries, dichotomies.

mod boundaries;
mod dichotomies;
mod pattern;
mod regions;
mod transitions;
mod window;

pub use boundaries::{boundary_contours, BoundarySet, Contour};
pub use dichotomies::{count_dichotomies, sphere_inputs, DichotomyReport, SweepMode};
pub use pattern::{activation_pattern, ActivationPattern};
pub use regions::{count_regions_2d, RegionMap};
pub use transitions::{count_transitions, transitions_with_lengths, Scope, TransitionCount, TransitionMode};
pub use window::Window;
