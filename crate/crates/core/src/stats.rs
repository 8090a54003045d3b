//! Monte Carlo tallies, binomial confidence intervals and a deterministic
//! trial executor.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Event counts over a set of trials; merging is exact addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub hits: u64,
}

impl Tally {
    pub fn record(&mut self, hit: bool) {
        self.trials += 1;
        self.hits += u64::from(hit);
    }

    pub fn merge(self, other: Tally) -> Tally {
        Tally {
            trials: self.trials + other.trials,
            hits: self.hits + other.hits,
        }
    }

    /// Frequency with a Wilson 95% interval; `None` when there is no data.
    pub fn estimate(&self) -> Option<Estimate> {
        if self.trials == 0 {
            return None;
        }
        let n = self.trials as f64;
        let p = self.hits as f64 / n;
        let (lo, hi) = wilson_interval(self.hits, self.trials, Z95);
        Some(Estimate {
            frequency: p,
            ci_low: lo,
            ci_high: hi,
        })
    }
}

impl FromIterator<bool> for Tally {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut t = Tally::default();
        for hit in iter {
            t.record(hit);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Median and interquartile range (linear interpolation between order
/// statistics). `None` for an empty slice.
pub fn median_iqr(values: &[f64]) -> Option<(f64, f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let i = pos.floor() as usize;
        let j = (i + 1).min(v.len() - 1);
        v[i] + (pos - i as f64) * (v[j] - v[i])
    };
    Some((q(0.5), q(0.25), q(0.75)))
}

/// Runs independent trial tasks on a bounded pool and returns their results
/// in trial order, so output never depends on the worker count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Executor {
    workers: usize,
}

impl Default for Executor {
    fn default() -> Self {
        Executor { workers: 1 }
    }
}

impl Executor {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::invalid("workers≥1", "workers = 0"));
        }
        Ok(Executor { workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn run<T, F>(&self, trials: Range<u64>, task: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        if self.workers == 1 {
            return trials.map(task).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        pool.install(|| trials.into_par_iter().map(task).collect())
    }
}
