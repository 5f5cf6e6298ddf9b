//! Monte-Carlo sweep of trajectory-length growth over network configurations.

use serde::{Deserialize, Serialize};

use super::bound::BoundSpec;
use super::length::{layer_length_profile, LengthProfile};
use super::refine::RefinePolicy;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::net::{Activation, Architecture, InitSpec, Network};
use crate::par::{map_indexed, Parallelism};
use crate::rng::{self, replica_seed, Stream};
use crate::stats::{mean, std_dev};

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub k: usize,
    pub sigma_w_sq: f64,
    pub sigma_b_sq: f64,
    pub depth: usize,
    pub input_dim: usize,
    pub activation: Activation,
}

impl GrowthConfig {
    pub fn architecture(&self) -> Architecture {
        Architecture::uniform(self.input_dim, self.k, self.depth, 1, self.activation)
    }

    pub fn bound(&self) -> Result<BoundSpec> {
        BoundSpec::from_variances(self.k, self.sigma_w_sq, self.sigma_b_sq, self.depth)
    }

    /// Cartesian product; `k` varies slowest, then `sigma_w_sq`, `sigma_b_sq`, depth.
    pub fn grid(
        ks: &[usize],
        sigma_w_sqs: &[f64],
        sigma_b_sqs: &[f64],
        depths: &[usize],
        input_dim: usize,
        activation: Activation,
    ) -> Vec<GrowthConfig> {
        let mut out = Vec::new();
        for &k in ks {
            for &sigma_w_sq in sigma_w_sqs {
                for &sigma_b_sq in sigma_b_sqs {
                    for &depth in depths {
                        out.push(GrowthConfig {
                            k,
                            sigma_w_sq,
                            sigma_b_sq,
                            depth,
                            input_dim,
                            activation,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSweep {
    pub configs: Vec<GrowthConfig>,
    pub replicas: usize,
    pub seed: u64,
    pub refine: RefinePolicy,
    pub include_output: bool,
    pub parallelism: Parallelism,
}

/// Aggregated growth of one configuration across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthStats {
    pub config: GrowthConfig,
    pub seed: u64,
    pub replicas: usize,
    /// Mean of `l(d) / l(d - 1)` for `d = 1..=depth` (index `d - 1`).
    pub ratio_mean: Vec<f64>,
    pub ratio_std: Vec<f64>,
    /// Mean over replicas of `ln l(d)` for `d = 0..=depth`.
    pub mean_log_length: Vec<f64>,
    /// `ln` of the replica-mean length for `d = 0..=depth`.
    pub log_mean_length: Vec<f64>,
    pub bound: BoundSpec,
    pub non_converged: usize,
    /// Per-replica profiles in replica order.
    pub profiles: Vec<LengthProfile>,
}

/// Random unit endpoints and the arc between them for replica `seed`.
pub fn replica_trajectory(input_dim: usize, seed: u64) -> Result<Trajectory> {
    let mut rng = rng::stream(seed, Stream::Trajectory);
    loop {
        let x0 = rng::unit_vector(&mut rng, input_dim);
        let x1 = rng::unit_vector(&mut rng, input_dim);
        match Trajectory::circular(x0, x1, 2) {
            Err(Error::DegenerateTrajectory(_)) if input_dim > 1 => continue,
            other => return other,
        }
    }
}

pub fn simulate_replica(
    config: &GrowthConfig,
    seed: u64,
    refine: &RefinePolicy,
    include_output: bool,
) -> Result<LengthProfile> {
    let net = Network::sample(
        &config.architecture(),
        &InitSpec::new(config.sigma_w_sq, config.sigma_b_sq, seed),
    )?;
    let traj = replica_trajectory(config.input_dim, seed)?;
    layer_length_profile(&net, &traj, refine, include_output)
}

fn aggregate(config: GrowthConfig, seed: u64, profiles: Vec<LengthProfile>) -> Result<GrowthStats> {
    let depth = config.depth;
    let mut ratio_mean = Vec::with_capacity(depth);
    let mut ratio_std = Vec::with_capacity(depth);
    let ratios: Vec<Vec<Option<f64>>> = profiles.iter().map(LengthProfile::ratios).collect();
    for d in 0..depth {
        let col: Vec<f64> = ratios.iter().filter_map(|r| r[d]).collect();
        ratio_mean.push(if col.is_empty() { 0.0 } else { mean(&col) });
        ratio_std.push(std_dev(&col));
    }
    let lengths_at = |d: usize| -> Vec<f64> {
        profiles
            .iter()
            .map(|p| if d == 0 { p.input_length } else { p.hidden_lengths()[d - 1] })
            .collect()
    };
    let mean_log_length = (0..=depth)
        .map(|d| mean(&lengths_at(d).iter().map(|l| l.ln()).collect::<Vec<_>>()))
        .collect();
    let log_mean_length = (0..=depth).map(|d| mean(&lengths_at(d)).ln()).collect();
    Ok(GrowthStats {
        config,
        seed,
        replicas: profiles.len(),
        ratio_mean,
        ratio_std,
        mean_log_length,
        log_mean_length,
        bound: config.bound()?,
        non_converged: profiles.iter().filter(|p| !p.converged).count(),
        profiles,
    })
}

/// Runs every (config, replica) pair; replica `r` of every config uses seed
/// `seed ^ r`. Results are independent of `parallelism`.
pub fn growth_sweep(sweep: &GrowthSweep) -> Result<Vec<GrowthStats>> {
    if sweep.replicas == 0 {
        return Err(Error::invalid("replicas must be >= 1"));
    }
    sweep.refine.validate()?;
    for c in &sweep.configs {
        c.architecture().validate()?;
        InitSpec::new(c.sigma_w_sq, c.sigma_b_sq, 0).validate()?;
    }
    let r = sweep.replicas;
    let results = map_indexed(sweep.parallelism, sweep.configs.len() * r, |i| {
        let (c, rep) = (i / r, i % r);
        simulate_replica(
            &sweep.configs[c],
            replica_seed(sweep.seed, rep as u64),
            &sweep.refine,
            sweep.include_output,
        )
    });
    let mut results = results.into_iter();
    sweep
        .configs
        .iter()
        .map(|&config| {
            let profiles = results.by_ref().take(r).collect::<Result<Vec<_>>>()?;
            aggregate(config, sweep.seed, profiles)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(configs: Vec<GrowthConfig>, replicas: usize, par: Parallelism) -> GrowthSweep {
        GrowthSweep {
            configs,
            replicas,
            seed: 42,
            refine: RefinePolicy {
                initial_samples: 128,
                rel_tol: 1e-3,
                max_samples: 1 << 16,
                ..RefinePolicy::default()
            },
            include_output: false,
            parallelism: par,
        }
    }

    #[test]
    fn deterministic_and_parallelism_independent() {
        let configs = GrowthConfig::grid(&[8], &[4.0], &[1.0], &[4], 4, Activation::HardTanh);
        let a = growth_sweep(&sweep(configs.clone(), 1, Parallelism::Sequential)).unwrap();
        let b = growth_sweep(&sweep(configs.clone(), 1, Parallelism::Sequential)).unwrap();
        assert_eq!(a, b);
        let c = growth_sweep(&sweep(configs.clone(), 3, Parallelism::Rayon)).unwrap();
        let d = growth_sweep(&sweep(configs, 3, Parallelism::Sequential)).unwrap();
        assert_eq!(c, d);
        assert_eq!(a[0].profiles[0], c[0].profiles[0]);
    }

    #[test]
    fn grid_order_and_shapes() {
        let g = GrowthConfig::grid(&[2, 3], &[1.0, 4.0], &[1.0], &[5], 2, Activation::HardTanh);
        assert_eq!(g.len(), 4);
        assert_eq!((g[1].k, g[1].sigma_w_sq), (2, 4.0));
        assert_eq!((g[2].k, g[2].sigma_w_sq), (3, 1.0));
        let stats = growth_sweep(&sweep(g[..1].to_vec(), 2, Parallelism::Sequential)).unwrap();
        assert_eq!(stats[0].ratio_mean.len(), 5);
        assert_eq!(stats[0].mean_log_length.len(), 6);
        assert!(stats[0].ratio_mean.iter().all(|r| *r >= 0.0));
    }

    #[test]
    fn zero_replicas_rejected() {
        let g = GrowthConfig::grid(&[2], &[1.0], &[1.0], &[2], 2, Activation::HardTanh);
        assert!(growth_sweep(&sweep(g, 0, Parallelism::Sequential)).is_err());
    }
}
