//! Log-domain streaming moments of importance weights.
//!
//! Weights arrive as logarithms. The accumulator keeps the running maximum
//! log-weight `max_log` and runs Welford's recurrence on the shifted weights
//! `exp(log w - max_log) ∈ (0, 1]`, rescaling whenever a new maximum appears.
//! Neither the mean nor the second moment can overflow, and identical weights
//! give a variance of exactly zero.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamingAccumulator {
    count: u64,
    max_log: f64,
    /// Mean of the shifted weights.
    mean: f64,
    /// Sum of squared deviations of the shifted weights.
    m2: f64,
}

impl Default for StreamingAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Mean and standard error of the accumulated weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub log_mean: f64,
    /// Standard error of the mean in the linear domain, from the
    /// Bessel-corrected sample variance. May be `+inf` when the weights span
    /// more than the `f64` range.
    pub std_error: f64,
    pub count: u64,
    /// Set when `count == 1`; the standard error is then reported as 0.
    pub low_count: bool,
}

impl StreamingAccumulator {
    pub const fn new() -> Self {
        Self {
            count: 0,
            max_log: f64::NEG_INFINITY,
            mean: 0.0,
            m2: 0.0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn max_log(&self) -> f64 {
        self.max_log
    }

    /// `Σ exp(log wᵢ - max_log)`.
    pub fn shifted_sum(&self) -> f64 {
        self.mean * self.count as f64
    }

    /// Adds one weight given as its logarithm. `-inf` is a zero weight; NaN and
    /// `+inf` are rejected.
    pub fn update(&mut self, log_weight: f64) -> Result<()> {
        if log_weight.is_nan() || log_weight == f64::INFINITY {
            return Err(Error::NonFiniteWeight(log_weight));
        }
        let x = if log_weight > self.max_log {
            let f = rescale_factor(self.max_log, log_weight);
            self.mean *= f;
            self.m2 *= f * f;
            self.max_log = log_weight;
            1.0
        } else if log_weight == f64::NEG_INFINITY {
            0.0
        } else {
            (log_weight - self.max_log).exp()
        };
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        Ok(())
    }

    /// Folds `other` into `self` (Chan et al. pairwise update). The result
    /// depends on merge order only through rounding; callers that need
    /// reproducible output merge in a fixed order.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let max_log = self.max_log.max(other.max_log);
        let fa = rescale_factor(self.max_log, max_log);
        let fb = rescale_factor(other.max_log, max_log);
        let (ma, mb) = (self.mean * fa, other.mean * fb);
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta = mb - ma;
        self.mean = ma + delta * (nb / total);
        self.m2 = self.m2 * fa * fa + other.m2 * fb * fb + delta * delta * (na * nb / total);
        self.count += other.count;
        self.max_log = max_log;
    }

    pub fn merged(mut self, other: &Self) -> Self {
        self.merge(other);
        self
    }

    /// `log` of the mean weight; `-inf` if every weight was zero.
    pub fn log_mean(&self) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        Ok(self.max_log + self.mean.ln())
    }

    pub fn summarize(&self) -> Result<Summary> {
        let log_mean = self.log_mean()?;
        let low_count = self.count == 1;
        let std_error = if low_count || self.m2 <= 0.0 {
            0.0
        } else {
            let n = self.count as f64;
            let shifted_se = (self.m2 / (n - 1.0) / n).sqrt();
            (self.max_log + shifted_se.ln()).exp()
        };
        Ok(Summary {
            log_mean,
            std_error,
            count: self.count,
            low_count,
        })
    }
}

/// `exp(from - to)` for `from ≤ to`, treating an empty (`-inf`) maximum as 1.
fn rescale_factor(from: f64, to: f64) -> f64 {
    if from == to {
        1.0
    } else {
        (from - to).exp()
    }
}

/// Log of the mean of `exp(log_weights)` together with the linear-domain
/// standard error.
pub fn streaming_log_mean(log_weights: &[f64]) -> Result<(f64, f64)> {
    let mut acc = StreamingAccumulator::new();
    for &w in log_weights {
        acc.update(w)?;
    }
    let s = acc.summarize()?;
    Ok((s.log_mean, s.std_error))
}
