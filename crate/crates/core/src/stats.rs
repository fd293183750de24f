//! Reproducible Monte Carlo trials and their summary statistics.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `trial` under `master`: the master seed selects the
/// key, the trial index selects an independent ChaCha stream. Any schedule
/// that hands trial `t` this generator reproduces the same values.
pub fn trial_rng(master: u64, trial: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

/// Mean, sample standard deviation and standard error of per-trial values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStats {
    values: Vec<f64>,
    mean: f64,
    sd: f64,
}

impl TrialStats {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("at least two trials are needed"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = libm::sqrt(ss / (n - 1.0));
        Ok(Self { values, mean, sd })
    }

    pub fn trials(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn stderr(&self) -> f64 {
        self.sd / libm::sqrt(self.values.len() as f64)
    }

    /// `mean - z·stderr`.
    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.stderr()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Runs `trials` independent trials sequentially, trial `t` drawing from
/// [`trial_rng`]`(master, t)`.
pub fn monte_carlo<F>(trials: usize, master: u64, mut run: F) -> Result<TrialStats>
where
    F: FnMut(&mut TrialRng) -> f64,
{
    let values = (0..trials as u64)
        .map(|t| run(&mut trial_rng(master, t)))
        .collect();
    TrialStats::from_values(values)
}
