//! Worker pool and parallel Monte Carlo under the derived-seed contract.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;
use swalloc_core::{trial_rng, TrialRng, TrialStats};

/// Caps the worker count; unset or 0 means one worker per core.
pub const THREADS_VAR: &str = "SWALLOC_THREADS";

static POOL: OnceLock<ThreadPool> = OnceLock::new();

pub fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_VAR)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
    })
}

/// Trial `t` draws from `trial_rng(master, t)`. Values are collected in trial
/// order, so the statistics match a sequential run bit for bit.
pub fn par_trials<F>(trials: usize, master: u64, run: F) -> anyhow::Result<TrialStats>
where
    F: Fn(&mut TrialRng) -> anyhow::Result<f64> + Sync,
{
    let values = pool().install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| run(&mut trial_rng(master, t)))
            .collect::<anyhow::Result<Vec<f64>>>()
    })?;
    Ok(TrialStats::from_values(values)?)
}

/// Order-preserving parallel map.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    pool().install(|| items.par_iter().map(f).collect())
}
