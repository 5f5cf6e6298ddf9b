//! Rayon against the sequential path on the three hot loops: growth replicas,
//! the region lattice and dichotomy samples. Build without the `parallel`
//! feature and both arms run sequentially.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use expressivity::measures::{count_dichotomies, count_regions_2d, sphere_inputs, SweepMode, Window};
use expressivity::net::{Activation, Architecture, InitSpec, Network};
use expressivity::par::Parallelism;
use expressivity::traj::{growth_sweep, GrowthConfig, GrowthSweep, RefinePolicy};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("rayon", Parallelism::Rayon)];

fn growth(c: &mut Criterion) {
    let mut g = c.benchmark_group("growth_sweep");
    g.sample_size(10);
    let configs = GrowthConfig::grid(&[32], &[4.0, 16.0], &[1.0], &[6], 32, Activation::HardTanh);
    for (name, par) in MODES {
        let sweep = GrowthSweep {
            configs: configs.clone(),
            replicas: 8,
            seed: 0,
            refine: RefinePolicy::default(),
            include_output: false,
            parallelism: par,
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| growth_sweep(black_box(&sweep)).unwrap()));
    }
    g.finish();
}

fn regions(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_regions_2d");
    g.sample_size(10);
    let arch = Architecture::uniform(2, 16, 3, 1, Activation::ReLU);
    let net = Network::sample(&arch, &InitSpec::new(2.0, 0.1, 1)).unwrap().without_readout();
    let window = Window::square(2);
    for (name, par) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| count_regions_2d(black_box(&net), &window, 512, par).unwrap())
        });
    }
    g.finish();
}

fn dichotomies(c: &mut Criterion) {
    let mut g = c.benchmark_group("count_dichotomies");
    g.sample_size(10);
    let arch = Architecture::uniform(32, 16, 6, 1, Activation::HardTanh);
    let init = InitSpec::new(4.0, 1.0, 3);
    let inputs = sphere_inputs(8, 32, 3);
    for (name, par) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| count_dichotomies(&arch, &init, inputs.view(), 5000, SweepMode::AllWeights, par).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, growth, regions, dichotomies);
criterion_main!(benches);
