//! Per-start-state return quantiles fitted on the training split.
//!
//! Every quantile in this crate uses the same left-continuous inverse CDF:
//! the smallest value whose cumulative mass reaches the level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack absorbing rounding in `level × total` when the cumulative
/// mass is meant to hit the level exactly.
const LEVEL_SLACK: f64 = 1e-12;

/// Whether cumulative mass `cum` out of `total` has reached `level`.
#[inline]
pub fn reaches(cum: f64, level: f64, total: f64) -> bool {
    cum >= level * total * (1.0 - LEVEL_SLACK)
}

/// Smallest `k ∈ 1..=n` with `k ≥ level · n`, i.e. the 1-based rank of the
/// empirical `level`-quantile of `n` equally weighted samples.
pub fn rank_for_level(level: f64, n: usize) -> usize {
    let target = level * n as f64 * (1.0 - LEVEL_SLACK);
    (target.ceil().max(1.0) as usize).min(n)
}

/// Empirical quantile of sorted integer samples.
pub fn sorted_quantile(sorted: &[i64], level: f64) -> i64 {
    sorted[rank_for_level(level, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePair {
    pub q_lo: Vec<i64>,
    pub q_hi: Vec<i64>,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl QuantilePair {
    /// Levels `α/2` and `1 − α/2`.
    pub fn default_levels(alpha: f64) -> (f64, f64) {
        (alpha / 2.0, 1.0 - alpha / 2.0)
    }

    pub fn lo(&self, state: usize) -> i64 {
        self.q_lo[state]
    }

    pub fn hi(&self, state: usize) -> i64 {
        self.q_hi[state]
    }
}

/// Fits `q_lo(x)` and `q_hi(x)` from `(start_state, return)` training pairs.
///
/// States without training samples get the pooled quantiles.
pub fn fit_state_quantiles(
    train: &[(usize, i64)],
    num_states: usize,
    alpha_lo: f64,
    alpha_hi: f64,
) -> Result<QuantilePair> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(0.0 < alpha_lo && alpha_lo < alpha_hi && alpha_hi < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile levels must satisfy 0 < {alpha_lo} < {alpha_hi} < 1"
        )));
    }
    let mut by_state: Vec<Vec<i64>> = vec![Vec::new(); num_states];
    let mut pooled = Vec::with_capacity(train.len());
    for &(x, y) in train {
        if x >= num_states {
            return Err(Error::InvalidParameter(format!("state {x} out of range")));
        }
        by_state[x].push(y);
        pooled.push(y);
    }
    pooled.sort_unstable();
    let pooled_pair = (sorted_quantile(&pooled, alpha_lo), sorted_quantile(&pooled, alpha_hi));
    let mut q_lo = Vec::with_capacity(num_states);
    let mut q_hi = Vec::with_capacity(num_states);
    for mut ys in by_state {
        if ys.is_empty() {
            q_lo.push(pooled_pair.0);
            q_hi.push(pooled_pair.1);
        } else {
            ys.sort_unstable();
            q_lo.push(sorted_quantile(&ys, alpha_lo));
            q_hi.push(sorted_quantile(&ys, alpha_hi));
        }
    }
    Ok(QuantilePair { q_lo, q_hi, alpha_lo, alpha_hi })
}
