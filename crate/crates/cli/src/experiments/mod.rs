//! One module per experiment id, plus the replica fan-out they share.

mod chain;
mod concentration;
mod flow;
mod gep;
mod oracle;
mod pde;
mod two_class;

use std::panic::{catch_unwind, AssertUnwindSafe};

use anyhow::{anyhow, Result};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use eqpert::numerics::rng::stream;

use crate::config::{Config, ExperimentId};
use crate::Outcome;

pub fn run(cfg: &Config) -> Result<Outcome> {
    match cfg.experiment {
        ExperimentId::GepPerturbation => gep::run(cfg),
        ExperimentId::ChainPerturbation => chain::run(cfg),
        ExperimentId::TwoClass => two_class::run(cfg),
        ExperimentId::OracleValidation => oracle::run(cfg),
        ExperimentId::PdeConvergence => pde::run(cfg),
        ExperimentId::FlowAudit => flow::run(cfg),
        ExperimentId::ConcentrationAudit => concentration::run(cfg),
    }
}

/// Run `count` replicas in parallel, replica `i` on stream `(seed, base + i)`.
/// Results come back in replica order; a panic or error names the replica.
pub(crate) fn replicas<T, F>(seed: u64, base: u64, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let id = base + i as u64;
            let mut rng = stream(seed, id);
            match catch_unwind(AssertUnwindSafe(|| f(&mut rng))) {
                Ok(Ok(v)) => Ok(v),
                Ok(Err(e)) => Err(e.context(format!("replica {i} (seed {seed}, stream {id})"))),
                Err(p) => {
                    let msg = p
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| p.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "unknown panic".into());
                    Err(anyhow!("replica {i} panicked (seed {seed}, stream {id}): {msg}"))
                }
            }
        })
        .collect()
}

/// Mean and standard error of the mean.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    eqpert::numerics::stats::mean_stderr(xs)
}

/// True when every consecutive pair strictly decreases.
pub(crate) fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Stream offset separating the replica families of one run.
pub(crate) fn family(index: usize) -> u64 {
    (index as u64) << 32
}

/// `[a, b, …]` in short scientific notation.
pub(crate) fn sci(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", v.join(", "))
}
