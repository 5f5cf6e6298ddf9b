//! Dispatch from a resolved config to the library, and file emission.

mod dichotomies;
mod growth;
mod plane;
mod plot;
mod training;
mod transitions;

use expressivity::par::Parallelism;
use expressivity::rng::PRNG_ALGORITHM;

use crate::config::{ExperimentConfig, Kind, Params};
use crate::error::{CliError, Result};
use crate::output::{OutDir, RunManifest, Status, MANIFEST_FORMAT};

pub use training::data_dir;

/// What a runner reports besides the files it wrote.
pub(crate) struct Report {
    pub status: Status,
    pub notes: Vec<String>,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Report {
    pub fn ok() -> Self {
        Self {
            status: Status::Ok,
            notes: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn flag(&mut self, status: Status, note: String) {
        if self.status == Status::Ok || status == Status::Diverged {
            self.status = status;
        }
        self.notes.push(note);
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub(crate) fn parallelism(threads: Option<usize>) -> Parallelism {
    match threads {
        Some(1) => Parallelism::Sequential,
        _ => Parallelism::Rayon,
    }
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// Runs one experiment into `config.out` and writes its manifest.
///
/// Flagged runs (non-convergence, divergence) still write every output and
/// the manifest; check [`RunManifest::status`].
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest> {
    let started = now();
    if let Params::Plot(p) = &config.params {
        if p.input.canonicalize().ok() == config.out.canonicalize().ok() {
            return Err(CliError::config("plot-data needs an output directory distinct from `in`"));
        }
    }
    let mut out = OutDir::prepare(&config.out, config.overwrite)?;
    let par = parallelism(config.threads);
    let seed = config.seed;
    let report = with_threads(config.threads, || match (&config.params, config.kind) {
        (Params::Growth(p), _) => growth::run(p, seed, par, &mut out),
        (Params::Transitions(p), _) => transitions::run(p, seed, par, &mut out),
        (Params::Plane(p), Kind::Regions) => plane::regions(p, seed, par, &mut out),
        (Params::Plane(p), _) => plane::boundaries(p, seed, par, &mut out),
        (Params::Dichotomies(p), _) => dichotomies::run(p, seed, par, &mut out),
        (Params::Train(p), Kind::TrainTraj) => training::train_traj(p, seed, &mut out),
        (Params::Train(p), _) => training::train_freeze(p, seed, par, &mut out),
        (Params::Plot(p), _) => plot::run(p, &mut out),
    })??;
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.to_string(),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        prng_algorithm: PRNG_ALGORITHM.to_string(),
        kind: config.kind.name().to_string(),
        config: serde_json::to_value(config)?,
        started,
        finished: now(),
        status: report.status,
        notes: report.notes,
        outputs: Vec::new(),
        extra: report.extra,
    };
    out.finish(manifest)
}
