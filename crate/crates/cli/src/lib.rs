//! Experiment runner for the equilibrium-perturbation toolkit.
//!
//! A run reads a TOML configuration, resolves defaults, fans replicas out over
//! a worker pool and writes a deterministic artifact set with a hash manifest.

pub mod artifacts;
pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;

use anyhow::{Context, Result};

pub use artifacts::Artifacts;
pub use config::{Config, ExperimentConfig, ExperimentId, Validated};
pub use report::Report;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "EQPERT_WORKERS";

/// Completed run: the summary and every artifact it produced.
pub struct Outcome {
    pub report: Report,
    pub artifacts: Artifacts,
}

/// Worker count from [`WORKERS_ENV`], or the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v} is not a positive integer"))?;
            anyhow::ensure!(n > 0, "{WORKERS_ENV} must be positive");
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Run a validated configuration on a pool of `workers` threads.
pub fn execute(v: &Validated, workers: usize) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("building worker pool")?;
    let mut outcome = pool.install(|| experiments::run(&v.config))?;
    for w in &v.warnings {
        outcome.report.warn(w.clone());
    }
    outcome.artifacts.add("effective_config.toml", v.config.to_toml());
    outcome.artifacts.add("report.json", outcome.report.to_json());
    Ok(outcome)
}

/// Run and write artifacts to the configured output directory (or `out`).
pub fn run_and_write(v: &Validated, workers: usize, out: Option<&Path>) -> Result<Report> {
    let outcome = execute(v, workers)?;
    let dir = out.unwrap_or(&v.config.output);
    outcome.artifacts.write(dir, v.config.experiment.name(), v.config.seed)?;
    Ok(outcome.report)
}
