use serde::{Deserialize, Serialize};

use super::refine::{relative_change_below, Coding, Outcome, Pt, RefinePolicy, Refiner, SegmentMeasure};
use super::trajectory::segment_norm;
use crate::error::Result;
use crate::net::Network;
use crate::traj::Trajectory;

/// Arc length of a trajectory and of its image at each hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthProfile {
    pub input_length: f64,
    /// `layer_lengths[d - 1]` is the length at hidden layer `d`; when
    /// `include_output` is set the readout image is appended last.
    pub layer_lengths: Vec<f64>,
    pub include_output: bool,
    /// Segments in the final sampling.
    pub samples: usize,
    pub converged: bool,
}

impl LengthProfile {
    /// Hidden-layer lengths only.
    pub fn hidden_lengths(&self) -> &[f64] {
        if self.include_output {
            &self.layer_lengths[..self.layer_lengths.len() - 1]
        } else {
            &self.layer_lengths
        }
    }

    /// `l(d) / l(d - 1)` for `d = 1..=n`, with `l(0)` the input length.
    /// `None` where the previous length is zero.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        std::iter::once(self.input_length)
            .chain(self.hidden_lengths().iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[0] > 0.0).then(|| w[1] / w[0]))
            .collect()
    }
}

struct LengthMeasure {
    layers: usize,
    output: bool,
}

impl SegmentMeasure for LengthMeasure {
    fn width(&self) -> usize {
        1 + self.layers + usize::from(self.output)
    }

    fn layers(&self) -> usize {
        self.layers
    }

    fn needs_output(&self) -> bool {
        self.output
    }

    fn coding(&self) -> Coding {
        Coding::Pattern
    }

    fn accumulate(&self, a: Pt<'_>, b: Pt<'_>, acc: &mut [f64]) {
        acc[0] += segment_norm(a.x().iter(), b.x().iter());
        for d in 0..self.layers {
            acc[1 + d] += segment_norm(a.act(d).iter(), b.act(d).iter());
        }
        if let (Some(oa), Some(ob)) = (a.out(), b.out()) {
            acc[1 + self.layers] += segment_norm(oa.iter(), ob.iter());
        }
    }
}

/// Per-layer arc lengths of the image of `traj`, refined per `refine`.
///
/// The readout layer is measured only when `include_output` is set.
pub fn layer_length_profile(
    net: &Network,
    traj: &Trajectory,
    refine: &RefinePolicy,
    include_output: bool,
) -> Result<LengthProfile> {
    let refiner = Refiner {
        net,
        traj,
        measure: LengthMeasure {
            layers: net.depth(),
            output: include_output,
        },
    };
    let Outcome {
        totals,
        segments,
        converged,
    } = refiner.run(refine, |h| relative_change_below(h, refine.rel_tol))?;
    Ok(LengthProfile {
        input_length: totals[0],
        layer_lengths: totals[1..].to_vec(),
        include_output,
        samples: segments,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Architecture, InitSpec};
    use crate::rng::{stream, unit_vector, Stream};
    use crate::traj::{arc_length, RefineStrategy};
    use approx::assert_relative_eq;
    use ndarray::{arr1, Array1, Array2};

    fn small_policy(strategy: RefineStrategy) -> RefinePolicy {
        RefinePolicy {
            initial_samples: 64,
            rel_tol: 1e-4,
            max_samples: 1 << 16,
            strategy,
        }
    }

    #[test]
    fn identity_net_preserves_length() {
        let k = 3;
        let net = Network::from_explicit(
            vec![Array2::eye(k); 4],
            vec![Array1::zeros(k); 4],
            Activation::HardTanh,
        )
        .unwrap();
        let traj = Trajectory::circular(arr1(&[0.5, 0.0, 0.1]), arr1(&[0.0, 0.6, -0.2]), 10).unwrap();
        for s in [RefineStrategy::Uniform, RefineStrategy::Adaptive] {
            let p = layer_length_profile(&net, &traj, &small_policy(s), false).unwrap();
            assert!(p.converged);
            for l in &p.layer_lengths {
                assert_relative_eq!(*l, p.input_length, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn zero_weight_net_has_zero_length() {
        let net = Network::from_explicit(
            vec![Array2::zeros((4, 2)), Array2::zeros((4, 4))],
            vec![Array1::zeros(4), Array1::zeros(4)],
            Activation::HardTanh,
        )
        .unwrap();
        let traj = Trajectory::segment(arr1(&[-1.0, 0.0]), arr1(&[1.0, 2.0]), 2).unwrap();
        let p = layer_length_profile(&net, &traj, &RefinePolicy::default(), false).unwrap();
        assert!(p.converged);
        assert_eq!(p.layer_lengths, vec![0.0, 0.0]);
        assert_eq!(p.ratios()[1], None);
    }

    #[test]
    fn linear_network_maps_polyline_exactly() {
        // Small weights keep every unit in its linear piece on this arc.
        let mut rng = stream(4, Stream::Network);
        let w1 = crate::rng::gaussian_matrix(&mut rng, 5, 3, 0.1);
        let w2 = crate::rng::gaussian_matrix(&mut rng, 4, 5, 0.1);
        let net = Network::from_explicit(
            vec![w1.clone(), w2.clone()],
            vec![Array1::zeros(5), Array1::zeros(4)],
            Activation::HardTanh,
        )
        .unwrap();
        let traj = Trajectory::circular(arr1(&[1.0, 0.0, 0.0]), arr1(&[0.0, 1.0, 1.0]), 2).unwrap();
        let policy = RefinePolicy {
            strategy: RefineStrategy::Uniform,
            ..small_policy(RefineStrategy::Uniform)
        };
        let p = layer_length_profile(&net, &traj, &policy, false).unwrap();
        let dense = traj.resampled(p.samples + 1).unwrap();
        let img1 = dense.points().dot(&w1.t());
        let img2 = img1.dot(&w2.t());
        assert_relative_eq!(p.layer_lengths[0], arc_length(img1.view()), max_relative = 1e-12);
        assert_relative_eq!(p.layer_lengths[1], arc_length(img2.view()), max_relative = 1e-12);
    }

    #[test]
    fn output_layer_is_optional() {
        let arch = Architecture::uniform(2, 8, 3, 2, Activation::HardTanh);
        let net = Network::sample(&arch, &InitSpec::new(2.0, 0.5, 3)).unwrap();
        let traj = Trajectory::circular(arr1(&[1.0, 0.0]), arr1(&[0.0, 1.0]), 2).unwrap();
        let without = layer_length_profile(&net, &traj, &RefinePolicy::default(), false).unwrap();
        let with = layer_length_profile(&net, &traj, &RefinePolicy::default(), true).unwrap();
        assert_eq!(without.layer_lengths.len(), 3);
        assert_eq!(with.layer_lengths.len(), 4);
        assert_eq!(with.hidden_lengths().len(), 3);
        let no_readout = net.clone().without_readout();
        assert!(layer_length_profile(&no_readout, &traj, &RefinePolicy::default(), true).is_err());
    }

    #[test]
    fn adaptive_agrees_with_uniform() {
        let arch = Architecture::uniform(5, 16, 5, 1, Activation::HardTanh);
        for seed in 0..4 {
            let net = Network::sample(&arch, &InitSpec::new(6.0, 1.0, seed)).unwrap();
            let mut rng = stream(seed, Stream::Trajectory);
            let traj = Trajectory::circular(unit_vector(&mut rng, 5), unit_vector(&mut rng, 5), 2).unwrap();
            let policy = RefinePolicy {
                initial_samples: 256,
                rel_tol: 1e-5,
                max_samples: 1 << 18,
                strategy: RefineStrategy::Uniform,
            };
            let uniform = layer_length_profile(&net, &traj, &policy, false).unwrap();
            let adaptive = layer_length_profile(
                &net,
                &traj,
                &RefinePolicy {
                    strategy: RefineStrategy::Adaptive,
                    ..policy
                },
                false,
            )
            .unwrap();
            assert!(uniform.converged && adaptive.converged);
            for (u, a) in uniform.layer_lengths.iter().zip(&adaptive.layer_lengths) {
                assert_relative_eq!(*u, *a, max_relative = 1e-3);
            }
            assert!(adaptive.samples < uniform.samples * 2);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Network::from_explicit(vec![Array2::eye(2)], vec![Array1::zeros(2)], Activation::ReLU).unwrap();
        let traj = Trajectory::segment(arr1(&[0.0, 0.0, 0.0]), arr1(&[1.0, 1.0, 1.0]), 4).unwrap();
        assert!(layer_length_profile(&net, &traj, &RefinePolicy::default(), false).is_err());
    }
}
