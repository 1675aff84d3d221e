//! Batch jobs behind the `mesoshrink` binary.
//!
//! Every job reads flat dataset directories, processes samples on a worker
//! pool and writes one file set per sample followed by `manifest.json`.
//! Per-sample work depends only on the job configuration and the sample's
//! own seed, so outputs do not depend on the number of workers.

pub mod args;
pub mod config;
pub mod dataset;
pub mod manifest;

mod eval;
mod explore;
mod gen;
mod rollout;
mod simulate;
mod train;

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

pub use args::{run_cli, Cli};
pub use config::{JobConfig, Net, Preset};
pub use manifest::{Entry, Failure, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
    #[error("{failed} of {total} samples failed")]
    Partial { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] mesoshrink_core::io::IoError),
    #[error(transparent)]
    StdIo(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Surrogate(#[from] mesoshrink_surrogate::SurrogateError),
    #[error(transparent)]
    Nn(#[from] mesoshrink_nn::NnError),
    #[error(transparent)]
    Eval(#[from] mesoshrink_core::eval::EvalError),
}

impl CliError {
    /// 2 for configuration problems detected before any work, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ScenarioMismatch(_) => 2,
            _ => 1,
        }
    }
}

/// What a finished job did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs a fully resolved job.
pub fn run_job(config: &JobConfig) -> Result<Report, CliError> {
    match config.command.as_str() {
        "gen" => gen::run(config),
        "simulate" => simulate::run(config),
        "train" => train::run(config),
        "rollout" => rollout::run(config),
        "eval" => eval::run(config),
        "explore-smooth" => explore::smooth(config),
        "explore-erase-layer" => explore::erase_layer(config),
        "explore-stats" => explore::stats(config),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

/// Seed of sample `index` in a job seeded with `seed` (SplitMix64 finaliser).
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stem_of(index: usize) -> String {
    format!("{index:06}")
}

/// Order-preserving parallel map on a pool of `workers` threads, logging
/// progress as items finish.
pub(crate) fn par_map<T, R, F>(workers: usize, label: &str, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("worker pool");
    let done = AtomicUsize::new(0);
    let n = items.len();
    pool.install(|| {
        items
            .par_iter()
            .map(|item| {
                let r = f(item);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                log::info!("{label}: {k}/{n}");
                r
            })
            .collect()
    })
}

/// Splits per-sample outcomes into entries and failures, keeping order.
pub(crate) fn partition(outcomes: Vec<Result<(Entry, bool), Failure>>, manifest: &mut Manifest) -> Report {
    let mut report = Report::default();
    for o in outcomes {
        match o {
            Ok((e, skipped)) => {
                if skipped {
                    report.skipped += 1;
                } else {
                    report.written += 1;
                }
                manifest.entries.push(e);
            }
            Err(f) => {
                log::warn!("{}: {}", f.stem, f.error);
                report.failed += 1;
                manifest.failures.push(f);
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_seeds_differ() {
        let mut s: Vec<u64> = (0..1000).map(|i| sample_seed(7, i)).collect();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 1000);
        assert_ne!(sample_seed(7, 0), sample_seed(8, 0));
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..50).collect();
        for workers in [1, 4] {
            assert_eq!(
                par_map(workers, "t", &items, |&i| i * i),
                items.iter().map(|i| i * i).collect::<Vec<_>>()
            );
        }
    }
}
