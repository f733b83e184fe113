//! QIS-Bootstrap: self-normalised importance-sampling quantiles of the
//! calibration returns that share the test start state, stabilised by
//! taking the midpoint of a bootstrap percentile interval.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::CalibrationSet;
use crate::error::{Error, Result};
use crate::quantile::{reaches, sorted_quantile};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QisInterval {
    pub lower: f64,
    pub upper: f64,
    /// Set when the two midpoints came out inverted and were swapped.
    pub swapped: bool,
}

impl QisInterval {
    pub fn contains(&self, y: i64) -> bool {
        self.lower <= y as f64 && y as f64 <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Returns and weights of the calibration samples starting at `x`, sorted by return.
fn restricted(x: usize, cal: &CalibrationSet) -> Result<(Vec<i64>, Vec<f64>)> {
    let mut pairs: Vec<(i64, f64)> =
        cal.samples.iter().zip(&cal.weights).filter(|(s, _)| s.0 == x).map(|(s, w)| (s.1, *w)).collect();
    if pairs.is_empty() {
        return Err(Error::EmptyStartState(x));
    }
    pairs.sort_by_key(|p| p.0);
    Ok(pairs.into_iter().unzip())
}

/// Weighted left-continuous quantile of sorted `ys` where sample `j` carries
/// `mult[j] · w[j]`; `None` when the total mass is zero.
fn sorted_weighted_quantile(ys: &[i64], mass: impl Fn(usize) -> f64, beta: f64) -> Option<i64> {
    let total: f64 = (0..ys.len()).map(&mass).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut cum = 0.0;
    let mut j = 0;
    while j < ys.len() {
        let y = ys[j];
        while j < ys.len() && ys[j] == y {
            cum += mass(j);
            j += 1;
        }
        if reaches(cum, beta, total) {
            return Some(y);
        }
    }
    ys.last().copied()
}

/// Self-normalised IS `β`-quantile of returns starting at `x`.
pub fn is_weighted_quantile(x: usize, cal: &CalibrationSet, beta: f64) -> Result<i64> {
    let (ys, ws) = restricted(x, cal)?;
    sorted_weighted_quantile(&ys, |j| ws[j], beta).ok_or(Error::ZeroWeights)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub num_resamples: usize,
    pub ci_level: f64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self { num_resamples: DEFAULT_RESAMPLES, ci_level: DEFAULT_CI_LEVEL }
    }
}

impl BootstrapParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_resamples < 1 {
            return Err(Error::InvalidParameter("bootstrap resample count must be ≥ 1".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidParameter(format!("bootstrap ci level must lie in (0,1), got {}", self.ci_level)));
        }
        Ok(())
    }
}

fn percentile_midpoint(mut values: Vec<i64>, ci_level: f64) -> f64 {
    values.sort_unstable();
    let tail = (1.0 - ci_level) / 2.0;
    let lo = sorted_quantile(&values, tail);
    let hi = sorted_quantile(&values, 1.0 - tail);
    (lo as f64 + hi as f64) / 2.0
}

/// Bootstrap-midpointed IS quantiles at `alpha_lo` and `alpha_hi`. Each
/// resample draws `(Y, ŵ)` pairs with replacement from the samples at `x`;
/// both levels are read off the same resamples.
pub fn qis_bootstrap_interval<R: Rng + ?Sized>(
    x: usize,
    cal: &CalibrationSet,
    alpha_lo: f64,
    alpha_hi: f64,
    params: BootstrapParams,
    rng: &mut R,
) -> Result<QisInterval> {
    params.validate()?;
    let (ys, ws) = restricted(x, cal)?;
    let n = ys.len();
    let mut lows = Vec::with_capacity(params.num_resamples);
    let mut highs = Vec::with_capacity(params.num_resamples);
    let mut mult = vec![0u32; n];
    let mut attempts = 0;
    while lows.len() < params.num_resamples {
        attempts += 1;
        if attempts > 100 * params.num_resamples {
            return Err(Error::ZeroWeights);
        }
        mult.iter_mut().for_each(|m| *m = 0);
        for _ in 0..n {
            mult[rng.gen_range(0..n)] += 1;
        }
        let mass = |j: usize| mult[j] as f64 * ws[j];
        if let (Some(lo), Some(hi)) =
            (sorted_weighted_quantile(&ys, mass, alpha_lo), sorted_weighted_quantile(&ys, mass, alpha_hi))
        {
            lows.push(lo);
            highs.push(hi);
        }
    }
    let lower = percentile_midpoint(lows, params.ci_level);
    let upper = percentile_midpoint(highs, params.ci_level);
    Ok(if upper < lower {
        QisInterval { lower: upper, upper: lower, swapped: true }
    } else {
        QisInterval { lower, upper, swapped: false }
    })
}
