//! Weighted split conformal prediction over an integer return grid.
//!
//! For a test start state `x` and candidate return `y`, calibration scores
//! `V_i` receive mass `ŵ(X_i, Y_i) / (Σ_j ŵ(X_j, Y_j) + ŵ(x, y))` and the test
//! candidate's share goes to an atom at `+∞`. The candidate is accepted when
//! its own score does not exceed the `β`-quantile of that distribution.
//!
//! Because only the test weight changes with `y`, each construction sorts
//! its calibration scores once into a [`ScoreLadder`] and answers every
//! candidate with a binary search over cumulative weight.
//!
//! Three score constructions are supported:
//!
//! - pinball: `s(x, y) = max(q_lo(x) − y, y − q_hi(x))` at level `1 − α`;
//! - double quantile: `q_lo(x) − y` and `y − q_hi(x)` thresholded separately,
//!   each at level `1 − α/2`;
//! - shifted values: `s(x, y) = y`, keeping candidates between the weighted
//!   `α/2` and `1 − α/2` quantiles of calibration returns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::ReturnGrid;
use crate::quantile::{rank_for_level, reaches, QuantilePair};
use crate::weights::WeightTable;

const NORMALIZATION_TOL: f64 = 1e-12;

/// Calibration pairs `(X_i, Y_i)` with their weights `ŵ(X_i, Y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub samples: Vec<(usize, i64)>,
    pub weights: Vec<f64>,
}

impl CalibrationSet {
    pub fn new(samples: Vec<(usize, i64)>, weights: Vec<f64>) -> Result<Self> {
        if samples.len() != weights.len() {
            return Err(Error::InvalidParameter(format!(
                "{} calibration samples but {} weights",
                samples.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("calibration weight {w} is negative or non-finite")));
        }
        Ok(Self { samples, weights })
    }

    pub fn unweighted(samples: Vec<(usize, i64)>) -> Self {
        let weights = vec![1.0; samples.len()];
        Self { samples, weights }
    }

    /// Resolves each sample's weight through the table, counting fallbacks.
    pub fn from_table(samples: Vec<(usize, i64)>, table: &WeightTable) -> Self {
        let weights = samples.iter().map(|&(x, y)| table.get(x, y)).collect();
        Self { samples, weights }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Normalised calibration masses and the mass placed at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    pub calibration: Vec<f64>,
    pub infinity: f64,
}

pub fn normalized_weights(weights: &[f64], w_test: f64) -> Result<NormalizedWeights> {
    let total: f64 = weights.iter().sum::<f64>() + w_test;
    if !(total > 0.0) {
        return Err(Error::ZeroWeights);
    }
    Ok(NormalizedWeights { calibration: weights.iter().map(|w| w / total).collect(), infinity: w_test / total })
}

/// Discrete score law with an extra atom at `+∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedScoreDistribution {
    pub atoms: Vec<(f64, f64)>,
    pub infinity_mass: f64,
}

impl WeightedScoreDistribution {
    pub fn new(scores: &[f64], weights: &NormalizedWeights) -> Result<Self> {
        if scores.len() != weights.calibration.len() {
            return Err(Error::InvalidParameter("score and weight counts differ".into()));
        }
        let dist = Self {
            atoms: scores.iter().copied().zip(weights.calibration.iter().copied()).collect(),
            infinity_mass: weights.infinity,
        };
        let total = dist.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!("score distribution has total mass {total}")));
        }
        Ok(dist)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.infinity_mass
    }
}

/// Smallest atom value whose cumulative probability reaches `beta`, with
/// equal scores merged and `+∞` ordered after every finite score.
pub fn weighted_quantile(dist: &WeightedScoreDistribution, beta: f64) -> f64 {
    let mut atoms = dist.atoms.clone();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let value = atoms[i].0;
        while i < atoms.len() && atoms[i].0 == value {
            cum += atoms[i].1;
            i += 1;
        }
        if reaches(cum, beta, 1.0) {
            return value;
        }
    }
    f64::INFINITY
}

/// Calibration scores sorted once, with cumulative (unnormalised) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLadder {
    values: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
}

impl ScoreLadder {
    pub fn new(scores: &[f64], weights: &[f64]) -> Self {
        let mut pairs: Vec<(f64, f64)> = scores.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        let mut i = 0;
        while i < pairs.len() {
            let v = pairs[i].0;
            while i < pairs.len() && pairs[i].0 == v {
                acc += pairs[i].1;
                i += 1;
            }
            values.push(v);
            cumulative.push(acc);
        }
        Self { values, cumulative, total: acc }
    }

    /// `β`-quantile of the weighted scores joined with a test atom of
    /// weight `w_test` at `+∞`.
    pub fn quantile(&self, w_test: f64, beta: f64) -> f64 {
        let total = self.total + w_test;
        if !(total > 0.0) {
            return f64::INFINITY;
        }
        let idx = self.cumulative.partition_point(|&c| !reaches(c, beta, total));
        self.values.get(idx).copied().unwrap_or(f64::INFINITY)
    }
}

/// Accepted candidates of a conformal set, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformalInterval {
    pub accepted: Vec<i64>,
}

impl ConformalInterval {
    pub fn lower(&self) -> Option<i64> {
        self.accepted.first().copied()
    }

    pub fn upper(&self) -> Option<i64> {
        self.accepted.last().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    /// Membership in the reported hull `[lower, upper]`.
    pub fn contains(&self, y: i64) -> bool {
        matches!((self.lower(), self.upper()), (Some(lo), Some(hi)) if lo <= y && y <= hi)
    }

    pub fn is_contiguous(&self) -> bool {
        self.accepted.windows(2).all(|w| w[1] == w[0] + 1)
    }

    pub fn length(&self) -> f64 {
        match (self.lower(), self.upper()) {
            (Some(lo), Some(hi)) => (hi - lo) as f64,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Pinball,
    DoubleQuantile,
    ShiftedValues,
}

fn pinball_score(q_lo: i64, q_hi: i64, y: i64) -> f64 {
    (q_lo - y).max(y - q_hi) as f64
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// A score construction with its calibration ladders built.
#[derive(Debug, Clone)]
pub struct PreparedConformal {
    kind: ScoreKind,
    alpha: f64,
    quantiles: Option<QuantilePair>,
    first: ScoreLadder,
    second: Option<ScoreLadder>,
}

impl PreparedConformal {
    pub fn new(kind: ScoreKind, cal: &CalibrationSet, quantiles: Option<&QuantilePair>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let q = |name| quantiles.ok_or_else(|| Error::InvalidParameter(format!("{name} scores need fitted quantiles")));
        let (first, second, quantiles) = match kind {
            ScoreKind::Pinball => {
                let q = q("pinball")?;
                let scores: Vec<f64> = cal.samples.iter().map(|&(x, y)| pinball_score(q.lo(x), q.hi(x), y)).collect();
                (ScoreLadder::new(&scores, &cal.weights), None, Some(q.clone()))
            }
            ScoreKind::DoubleQuantile => {
                let q = q("double-quantile")?;
                let lo: Vec<f64> = cal.samples.iter().map(|&(x, y)| (q.lo(x) - y) as f64).collect();
                let hi: Vec<f64> = cal.samples.iter().map(|&(x, y)| (y - q.hi(x)) as f64).collect();
                (ScoreLadder::new(&lo, &cal.weights), Some(ScoreLadder::new(&hi, &cal.weights)), Some(q.clone()))
            }
            ScoreKind::ShiftedValues => {
                // Lower side is the upper quantile of −Y, i.e. the test mass sits below every return.
                let neg: Vec<f64> = cal.samples.iter().map(|&(_, y)| -y as f64).collect();
                let pos: Vec<f64> = cal.samples.iter().map(|&(_, y)| y as f64).collect();
                (ScoreLadder::new(&neg, &cal.weights), Some(ScoreLadder::new(&pos, &cal.weights)), None)
            }
        };
        Ok(Self { kind, alpha, quantiles, first, second })
    }

    pub fn kind(&self) -> ScoreKind {
        self.kind
    }

    /// Whether candidate `y` at start state `x` with test weight `w_test` is accepted.
    pub fn accepts(&self, x: usize, y: i64, w_test: f64) -> bool {
        let a = self.alpha;
        match self.kind {
            ScoreKind::Pinball => {
                let q = self.quantiles.as_ref().expect("pinball carries quantiles");
                pinball_score(q.lo(x), q.hi(x), y) <= self.first.quantile(w_test, 1.0 - a)
            }
            ScoreKind::DoubleQuantile => {
                let q = self.quantiles.as_ref().expect("double quantile carries quantiles");
                let upper = self.second.as_ref().expect("two ladders");
                ((q.lo(x) - y) as f64) <= self.first.quantile(w_test, 1.0 - a / 2.0)
                    && ((y - q.hi(x)) as f64) <= upper.quantile(w_test, 1.0 - a / 2.0)
            }
            ScoreKind::ShiftedValues => {
                let upper = self.second.as_ref().expect("two ladders");
                (-y as f64) <= self.first.quantile(w_test, 1.0 - a / 2.0)
                    && (y as f64) <= upper.quantile(w_test, 1.0 - a / 2.0)
            }
        }
    }

    /// Scans the grid, asking `test_weight(y)` for `ŵ(x, y)` at each candidate.
    pub fn interval(&self, x: usize, grid: ReturnGrid, test_weight: impl Fn(i64) -> f64) -> ConformalInterval {
        ConformalInterval { accepted: grid.iter().filter(|&y| self.accepts(x, y, test_weight(y))).collect() }
    }
}

fn check_grid(grid: ReturnGrid) -> Result<()> {
    if grid.is_empty() {
        Err(Error::Empty("candidate grid"))
    } else {
        Ok(())
    }
}

pub fn pinball_conformal_set(
    x: usize,
    cal: &CalibrationSet,
    quantiles: &QuantilePair,
    weights: &WeightTable,
    alpha: f64,
    grid: ReturnGrid,
) -> Result<ConformalInterval> {
    check_grid(grid)?;
    let prepared = PreparedConformal::new(ScoreKind::Pinball, cal, Some(quantiles), alpha)?;
    Ok(prepared.interval(x, grid, |y| weights.value_or_fallback(x, y)))
}

pub fn double_quantile_conformal_set(
    x: usize,
    cal: &CalibrationSet,
    quantiles: &QuantilePair,
    weights: &WeightTable,
    alpha: f64,
    grid: ReturnGrid,
) -> Result<ConformalInterval> {
    check_grid(grid)?;
    let prepared = PreparedConformal::new(ScoreKind::DoubleQuantile, cal, Some(quantiles), alpha)?;
    Ok(prepared.interval(x, grid, |y| weights.value_or_fallback(x, y)))
}

pub fn shifted_values_conformal_set(
    x: usize,
    cal: &CalibrationSet,
    weights: &WeightTable,
    alpha: f64,
    grid: ReturnGrid,
) -> Result<ConformalInterval> {
    check_grid(grid)?;
    let prepared = PreparedConformal::new(ScoreKind::ShiftedValues, cal, None, alpha)?;
    Ok(prepared.interval(x, grid, |y| weights.value_or_fallback(x, y)))
}

/// `level`-quantile of `(1/(n+1))(Σ δ_{V_i} + δ_∞)` from sorted scores: the
/// `⌈level·(n+1)⌉`-th order statistic, or `+∞` past the end.
pub fn order_statistic_threshold(sorted: &[f64], level: f64) -> f64 {
    let k = rank_for_level(level, sorted.len() + 1);
    sorted.get(k - 1).copied().unwrap_or(f64::INFINITY)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Unweighted split-CP threshold `η` for pinball scores.
pub fn standard_split_threshold(samples: &[(usize, i64)], quantiles: &QuantilePair, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let scores = sorted(samples.iter().map(|&(x, y)| pinball_score(quantiles.lo(x), quantiles.hi(x), y)).collect());
    Ok(order_statistic_threshold(&scores, 1.0 - alpha))
}

/// Classical split CP with the pinball score; `η` does not depend on `y`.
pub fn standard_split_cp(
    x: usize,
    samples: &[(usize, i64)],
    quantiles: &QuantilePair,
    alpha: f64,
    grid: ReturnGrid,
) -> Result<ConformalInterval> {
    check_grid(grid)?;
    let eta = standard_split_threshold(samples, quantiles, alpha)?;
    let (lo, hi) = (quantiles.lo(x), quantiles.hi(x));
    Ok(ConformalInterval { accepted: grid.iter().filter(|&y| pinball_score(lo, hi, y) <= eta).collect() })
}

/// Unweighted double-quantile set built from order statistics.
pub fn unweighted_double_quantile_set(
    x: usize,
    samples: &[(usize, i64)],
    quantiles: &QuantilePair,
    alpha: f64,
    grid: ReturnGrid,
) -> Result<ConformalInterval> {
    check_alpha(alpha)?;
    check_grid(grid)?;
    let lo_scores = sorted(samples.iter().map(|&(s, y)| (quantiles.lo(s) - y) as f64).collect());
    let hi_scores = sorted(samples.iter().map(|&(s, y)| (y - quantiles.hi(s)) as f64).collect());
    let eta_lo = order_statistic_threshold(&lo_scores, 1.0 - alpha / 2.0);
    let eta_hi = order_statistic_threshold(&hi_scores, 1.0 - alpha / 2.0);
    let (ql, qh) = (quantiles.lo(x), quantiles.hi(x));
    Ok(ConformalInterval {
        accepted: grid.iter().filter(|&y| ((ql - y) as f64) <= eta_lo && ((y - qh) as f64) <= eta_hi).collect(),
    })
}

/// Unweighted shifted-values set built from order statistics.
pub fn unweighted_shifted_values_set(samples: &[(usize, i64)], alpha: f64, grid: ReturnGrid) -> Result<ConformalInterval> {
    check_alpha(alpha)?;
    check_grid(grid)?;
    let neg = sorted(samples.iter().map(|&(_, y)| -y as f64).collect());
    let pos = sorted(samples.iter().map(|&(_, y)| y as f64).collect());
    let eta_lo = order_statistic_threshold(&neg, 1.0 - alpha / 2.0);
    let eta_hi = order_statistic_threshold(&pos, 1.0 - alpha / 2.0);
    Ok(ConformalInterval { accepted: grid.iter().filter(|&y| (-y as f64) <= eta_lo && (y as f64) <= eta_hi).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(atoms: &[(f64, f64)], inf: f64) -> WeightedScoreDistribution {
        WeightedScoreDistribution { atoms: atoms.to_vec(), infinity_mass: inf }
    }

    /// Brute-force inverse CDF: for each candidate value, sum every atom ≤ it.
    fn brute_quantile(d: &WeightedScoreDistribution, beta: f64) -> f64 {
        let mut candidates: Vec<f64> = d.atoms.iter().map(|a| a.0).collect();
        candidates.sort_by(f64::total_cmp);
        for v in candidates {
            let mass: f64 = d.atoms.iter().filter(|a| a.0 <= v).map(|a| a.1).sum();
            if mass >= beta - 1e-12 {
                return v;
            }
        }
        f64::INFINITY
    }

    #[test]
    fn normalized_weight_examples() {
        let n = normalized_weights(&[1.0; 3], 1.0).unwrap();
        assert_eq!(n.calibration, vec![0.25; 3]);
        assert_eq!(n.infinity, 0.25);
        let n = normalized_weights(&[2.0, 6.0], 0.0).unwrap();
        assert_eq!((n.calibration.clone(), n.infinity), (vec![0.25, 0.75], 0.0));
        let n = normalized_weights(&[2.0, 1.0, 1.0], 4.0).unwrap();
        let sum: f64 = [2.0, 1.0, 1.0, 4.0].iter().sum();
        assert_eq!(n.calibration, vec![2.0 / sum, 1.0 / sum, 1.0 / sum]);
        assert_eq!(n.calibration, vec![0.25, 0.125, 0.125]);
        assert_eq!(n.infinity, 0.5);
        assert!(matches!(normalized_weights(&[0.0, 0.0], 0.0), Err(Error::ZeroWeights)));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(weighted_quantile(&dist(&[(5.0, 1.0)], 0.0), 0.9), 5.0);
        let uniform = dist(&[(3.0, 0.25), (1.0, 0.25), (4.0, 0.25), (2.0, 0.25)], 0.0);
        assert_eq!(weighted_quantile(&uniform, 0.5), 2.0);
        let with_inf = dist(&[(1.0, 0.2), (3.0, 0.5)], 0.3);
        assert_eq!(weighted_quantile(&with_inf, 0.9), f64::INFINITY);
        assert_eq!(brute_quantile(&with_inf, 0.9), f64::INFINITY);
        assert_eq!(weighted_quantile(&with_inf, 0.7), 3.0);
    }

    #[test]
    fn ties_merge_before_scan() {
        let d = dist(&[(2.0, 0.3), (1.0, 0.2), (2.0, 0.3)], 0.2);
        assert_eq!(weighted_quantile(&d, 0.8), 2.0);
        assert_eq!(weighted_quantile(&d, 0.81), f64::INFINITY);
    }

    #[test]
    fn order_statistic_rank() {
        // n = 19, α = 0.1: ⌈0.9·20⌉ = 18th smallest of 19 scores.
        let scores: Vec<f64> = (1..=19).map(|v| (v * 10) as f64).collect();
        assert_eq!(order_statistic_threshold(&scores, 0.9), 180.0);
        let d = dist(&scores.iter().map(|&v| (v, 1.0 / 20.0)).collect::<Vec<_>>(), 1.0 / 20.0);
        assert_eq!(brute_quantile(&d, 0.9), 180.0);
        assert_eq!(order_statistic_threshold(&scores[..5], 0.9), f64::INFINITY);
    }

    fn toy_quantiles() -> QuantilePair {
        QuantilePair { q_lo: vec![0, 5], q_hi: vec![10, 9], alpha_lo: 0.05, alpha_hi: 0.95 }
    }

    #[test]
    fn empty_calibration_accepts_everything() {
        let grid = ReturnGrid::new(-20, 30);
        let cal = CalibrationSet::unweighted(vec![]);
        let unit = WeightTable::empty(1.0).unwrap();
        let q = toy_quantiles();
        let full: Vec<i64> = grid.iter().collect();
        assert_eq!(pinball_conformal_set(0, &cal, &q, &unit, 0.1, grid).unwrap().accepted, full);
        assert_eq!(double_quantile_conformal_set(1, &cal, &q, &unit, 0.1, grid).unwrap().accepted, full);
        assert_eq!(shifted_values_conformal_set(0, &cal, &unit, 0.1, grid).unwrap().accepted, full);
        assert!(pinball_conformal_set(0, &cal, &q, &unit, 0.1, ReturnGrid::new(1, 0)).is_err());
    }

    #[test]
    fn pinball_symmetric_about_midpoint() {
        let samples: Vec<(usize, i64)> = (0..200).map(|i| (i % 2, (i as i64 * 7919) % 23 - 3)).collect();
        let cal = CalibrationSet::unweighted(samples);
        let q = toy_quantiles();
        let table = WeightTable::empty(1.0).unwrap();
        let set = pinball_conformal_set(0, &cal, &q, &table, 0.2, ReturnGrid::new(-100, 100)).unwrap();
        assert!(set.is_contiguous());
        assert_eq!(set.lower().unwrap() + set.upper().unwrap(), q.lo(0) + q.hi(0));
    }

    #[test]
    fn shifted_values_collapse_to_constant() {
        let cal = CalibrationSet::unweighted(vec![(0, 7); 400]);
        let mut table = WeightTable::empty(1e-3).unwrap();
        table.insert(0, 7, 1.0).unwrap();
        let set = shifted_values_conformal_set(0, &cal, &table, 0.1, ReturnGrid::new(0, 20)).unwrap();
        assert_eq!(set.accepted, vec![7]);
    }

    #[test]
    fn standard_equals_unit_weighted_pinball() {
        let samples: Vec<(usize, i64)> = (0..57).map(|i| (i % 2, (i as i64 * 31) % 41 - 10)).collect();
        let q = toy_quantiles();
        let grid = ReturnGrid::new(-60, 60);
        let unit = WeightTable::empty(1.0).unwrap();
        let cal = CalibrationSet::unweighted(samples.clone());
        for alpha in [0.05, 0.1, 0.3] {
            for x in 0..2 {
                assert_eq!(
                    standard_split_cp(x, &samples, &q, alpha, grid).unwrap(),
                    pinball_conformal_set(x, &cal, &q, &unit, alpha, grid).unwrap()
                );
            }
        }
    }

    #[test]
    fn missing_quantiles_rejected() {
        let cal = CalibrationSet::unweighted(vec![(0, 1)]);
        assert!(PreparedConformal::new(ScoreKind::Pinball, &cal, None, 0.1).is_err());
        assert!(PreparedConformal::new(ScoreKind::ShiftedValues, &cal, None, 1.5).is_err());
        assert!(CalibrationSet::new(vec![(0, 1)], vec![-1.0]).is_err());
    }

    proptest! {
        #[test]
        fn ladder_matches_generic_quantile(
            atoms in prop::collection::vec((-20i64..20, 0.01f64..5.0), 0..40),
            w_test in 0.0f64..5.0,
            beta in 0.01f64..0.99,
        ) {
            let scores: Vec<f64> = atoms.iter().map(|a| a.0 as f64).collect();
            let weights: Vec<f64> = atoms.iter().map(|a| a.1).collect();
            prop_assume!(weights.iter().sum::<f64>() + w_test > 0.0);
            let norm = normalized_weights(&weights, w_test).unwrap();
            let d = WeightedScoreDistribution::new(&scores, &norm).unwrap();
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-12);
            let generic = weighted_quantile(&d, beta);
            prop_assert_eq!(generic, brute_quantile(&d, beta));
            prop_assert_eq!(ScoreLadder::new(&scores, &weights).quantile(w_test, beta), generic);
        }

        #[test]
        fn quantile_monotone_and_order_free(
            atoms in prop::collection::vec((-20i64..20, 0.01f64..5.0), 1..30),
            inf in 0.0f64..2.0,
            b1 in 0.01f64..0.99,
            b2 in 0.01f64..0.99,
            rot in 0usize..30,
        ) {
            let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>() + inf;
            let mut d = dist(&atoms.iter().map(|a| (a.0 as f64, a.1 / total)).collect::<Vec<_>>(), inf / total);
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(weighted_quantile(&d, lo) <= weighted_quantile(&d, hi));
            let before = weighted_quantile(&d, hi);
            let k = rot % d.atoms.len();
            d.atoms.rotate_left(k);
            d.atoms.reverse();
            prop_assert_eq!(weighted_quantile(&d, hi), before);
        }

        #[test]
        fn nested_in_alpha(
            ys in prop::collection::vec((0usize..2, -15i64..25), 0..80),
            ws in prop::collection::vec(0.1f64..3.0, 80),
            a1 in 0.02f64..0.5,
            a2 in 0.02f64..0.5,
        ) {
            let (small, large) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let cal = CalibrationSet::new(ys.clone(), ws[..ys.len()].to_vec()).unwrap();
            let q = toy_quantiles();
            let mut table = WeightTable::empty(1.0).unwrap();
            for y in -30..40 {
                table.insert(0, y, 0.2 + ((y * 13).rem_euclid(7)) as f64 * 0.4).unwrap();
            }
            let grid = ReturnGrid::new(-30, 40);
            for kind in [ScoreKind::Pinball, ScoreKind::DoubleQuantile, ScoreKind::ShiftedValues] {
                let wide = PreparedConformal::new(kind, &cal, Some(&q), small).unwrap().interval(0, grid, |y| table.value_or_fallback(0, y));
                let narrow = PreparedConformal::new(kind, &cal, Some(&q), large).unwrap().interval(0, grid, |y| table.value_or_fallback(0, y));
                prop_assert!(narrow.accepted.iter().all(|y| wide.accepted.contains(y)));
            }
            let wide = standard_split_cp(1, &ys, &q, small, grid).unwrap();
            let narrow = standard_split_cp(1, &ys, &q, large, grid).unwrap();
            prop_assert!(narrow.accepted.iter().all(|y| wide.accepted.contains(y)));
        }

        #[test]
        fn unit_weights_reduce_to_order_statistics(
            ys in prop::collection::vec((0usize..2, -15i64..25), 0..60),
            alpha in 0.02f64..0.6,
        ) {
            let q = toy_quantiles();
            let grid = ReturnGrid::new(-40, 50);
            let unit = WeightTable::empty(1.0).unwrap();
            let cal = CalibrationSet::unweighted(ys.clone());
            for x in 0..2 {
                prop_assert_eq!(
                    pinball_conformal_set(x, &cal, &q, &unit, alpha, grid).unwrap(),
                    standard_split_cp(x, &ys, &q, alpha, grid).unwrap()
                );
                prop_assert_eq!(
                    double_quantile_conformal_set(x, &cal, &q, &unit, alpha, grid).unwrap(),
                    unweighted_double_quantile_set(x, &ys, &q, alpha, grid).unwrap()
                );
                prop_assert_eq!(
                    shifted_values_conformal_set(x, &cal, &unit, alpha, grid).unwrap(),
                    unweighted_shifted_values_set(&ys, alpha, grid).unwrap()
                );
            }
        }
    }
}
