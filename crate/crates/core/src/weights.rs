//! Likelihood-ratio estimates `ŵ(x, y)` over the (start state, return) grid.
//!
//! Two estimators are provided. The empirical one averages per-trajectory
//! action-probability ratios inside each `(x, y)` bucket of the training
//! data. The Monte-Carlo one fits a transition model by maximum likelihood
//! and compares return histograms of simulated rollouts under both policies.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{sample_trajectory, MdpModel, Policy, ReturnDistribution, Trajectory};

/// Weight returned for `(x, y)` pairs the table has no entry for.
pub const DEFAULT_FALLBACK: f64 = 1.0;

#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "WeightTableDocument", into = "WeightTableDocument")]
pub struct WeightTable {
    entries: BTreeMap<(usize, i64), f64>,
    counts: BTreeMap<(usize, i64), usize>,
    fallback: f64,
    misses: AtomicU64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightTableDocument {
    entries: BTreeMap<String, f64>,
    fallback: f64,
    miss_counter: u64,
}

impl From<WeightTable> for WeightTableDocument {
    fn from(t: WeightTable) -> Self {
        Self {
            entries: t.entries.iter().map(|((x, y), w)| (format!("{x}:{y}"), *w)).collect(),
            fallback: t.fallback,
            miss_counter: t.misses(),
        }
    }
}

impl TryFrom<WeightTableDocument> for WeightTable {
    type Error = Error;

    fn try_from(doc: WeightTableDocument) -> Result<Self> {
        let mut table = WeightTable::empty(doc.fallback)?;
        for (key, w) in doc.entries {
            let parsed = key
                .split_once(':')
                .and_then(|(x, y)| Some((x.parse::<usize>().ok()?, y.parse::<i64>().ok()?)));
            let (x, y) = parsed.ok_or_else(|| Error::Config(format!("bad weight key {key:?}, expected \"state:return\"")))?;
            table.insert(x, y, w)?;
        }
        table.misses.store(doc.miss_counter, Ordering::Relaxed);
        Ok(table)
    }
}

impl Clone for WeightTable {
    fn clone(&self) -> Self {
        Self {
            entries: self.entries.clone(),
            counts: self.counts.clone(),
            fallback: self.fallback,
            misses: AtomicU64::new(self.misses()),
        }
    }
}

impl PartialEq for WeightTable {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.fallback.to_bits() == other.fallback.to_bits()
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("weights must be finite and ≥ 0, got {w}")))
    }
}

impl WeightTable {
    pub fn empty(fallback: f64) -> Result<Self> {
        check_weight(fallback)?;
        Ok(Self { entries: BTreeMap::new(), counts: BTreeMap::new(), fallback, misses: AtomicU64::new(0) })
    }

    /// Table built from the exact per-state ratios of the DP oracle.
    pub fn from_exact(per_state: &[BTreeMap<i64, f64>]) -> Result<Self> {
        let mut table = Self::empty(DEFAULT_FALLBACK)?;
        for (x, ws) in per_state.iter().enumerate() {
            for (&y, &w) in ws {
                table.insert(x, y, w)?;
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, x: usize, y: i64, w: f64) -> Result<()> {
        check_weight(w)?;
        self.entries.insert((x, y), w);
        Ok(())
    }

    /// Looks up `ŵ(x, y)`, counting a miss when the fallback is used.
    pub fn get(&self, x: usize, y: i64) -> f64 {
        match self.entries.get(&(x, y)) {
            Some(w) => *w,
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                self.fallback
            }
        }
    }

    /// Looks up `ŵ(x, y)` without touching the miss counter.
    pub fn value_or_fallback(&self, x: usize, y: i64) -> f64 {
        self.peek(x, y).unwrap_or(self.fallback)
    }

    pub fn peek(&self, x: usize, y: i64) -> Option<f64> {
        self.entries.get(&(x, y)).copied()
    }

    /// Number of training trajectories behind an empirical entry.
    pub fn count(&self, x: usize, y: i64) -> usize {
        self.counts.get(&(x, y)).copied().unwrap_or(0)
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn reset_misses(&self) {
        self.misses.store(0, Ordering::Relaxed);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, i64), f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `Π π(a_t|x_t) / Π πᵇ(a_t|x_t)` for one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TrajectoryRatio(pub f64);

impl TrajectoryRatio {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Product of per-step action-probability ratios, accumulated in log space.
pub fn trajectory_ratio(traj: &Trajectory, target: &Policy, behavior: &Policy) -> Result<TrajectoryRatio> {
    let mut log_ratio = 0.0;
    for step in &traj.steps {
        let pb = behavior.prob(step.state, step.action);
        if pb <= 0.0 {
            return Err(Error::AbsoluteContinuity { state: step.state, action: step.action });
        }
        let pt = target.prob(step.state, step.action);
        if pt == 0.0 {
            return Ok(TrajectoryRatio(0.0));
        }
        log_ratio += pt.ln() - pb.ln();
    }
    Ok(TrajectoryRatio(log_ratio.exp()))
}

/// Running per-bucket averages of trajectory ratios. Each trajectory may carry
/// a mass, which lets exact enumeration stand in for sampling.
#[derive(Debug, Default)]
pub struct WeightAccumulator {
    buckets: BTreeMap<(usize, i64), (f64, f64, usize)>,
}

impl WeightAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, traj: &Trajectory, target: &Policy, behavior: &Policy, mass: f64) -> Result<()> {
        let ratio = trajectory_ratio(traj, target, behavior)?.value();
        let bucket = self.buckets.entry((traj.start_state(), traj.total_return())).or_insert((0.0, 0.0, 0));
        bucket.0 += mass * ratio;
        bucket.1 += mass;
        bucket.2 += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<WeightTable> {
        if self.buckets.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut table = WeightTable::empty(DEFAULT_FALLBACK)?;
        for (key, (weighted, mass, n)) in self.buckets {
            if mass > 0.0 {
                table.insert(key.0, key.1, weighted / mass)?;
                table.counts.insert(key, n);
            }
        }
        Ok(table)
    }
}

/// `ŵ(x, y) = (1/N(x,y)) Σ ratio(τ)` over training trajectories with start
/// state `x` and return `y`.
pub fn empirical_weight_table(train: &[Trajectory], target: &Policy, behavior: &Policy) -> Result<WeightTable> {
    let mut acc = WeightAccumulator::new();
    for traj in train {
        acc.add(traj, target, behavior, 1.0)?;
    }
    acc.finish()
}

/// Closed-form `(m, M)` bracketing every trajectory ratio between two
/// ε-greedy mixtures of the same deterministic policy.
pub fn ratio_bounds(epsilon: f64, epsilon_b: f64, num_actions: usize, horizon: usize) -> Result<(f64, f64)> {
    for e in [epsilon, epsilon_b] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::InvalidParameter(format!("mixing weight {e} outside [0,1]")));
        }
    }
    if epsilon_b == 0.0 {
        if epsilon > 0.0 {
            // The behavior never explores, so any non-greedy target action is unsupported.
            return Err(Error::AbsoluteContinuity { state: 0, action: 0 });
        }
        return Ok((1.0, 1.0));
    }
    let na = num_actions as f64;
    let off_greedy = epsilon / epsilon_b;
    let on_greedy = ((1.0 - epsilon) + epsilon / na) / ((1.0 - epsilon_b) + epsilon_b / na);
    let h = horizon as i32;
    Ok((off_greedy.min(on_greedy).powi(h), off_greedy.max(on_greedy).powi(h)))
}

/// Maximum-likelihood transition model from training trajectories.
///
/// Unvisited `(x, a)` rows become uniform over next states. Rewards are taken
/// from observed `(x, a, x')` triples; unobserved triples reuse the mean
/// reward observed at `(x, a)`, or the global mean when the row is unvisited.
pub fn estimate_model(train: &[Trajectory], num_states: usize, num_actions: usize) -> Result<MdpModel> {
    let first = train.first().ok_or(Error::Empty("training set"))?;
    let horizon = first.steps.len();
    let cube = num_states * num_actions * num_states;
    let mut counts = vec![0u64; cube];
    let mut reward_seen: Vec<Option<i64>> = vec![None; cube];
    let mut starts = vec![0u64; num_states];
    let idx = |s: usize, a: usize, n: usize| (s * num_actions + a) * num_states + n;
    let (mut reward_sum, mut reward_n) = (0i128, 0i128);
    for traj in train {
        starts[traj.start_state()] += 1;
        let nexts = traj.steps.iter().skip(1).map(|s| s.state).chain(std::iter::once(traj.final_state));
        for (step, next) in traj.steps.iter().zip(nexts) {
            let i = idx(step.state, step.action, next);
            counts[i] += 1;
            reward_seen[i] = Some(step.reward);
            reward_sum += step.reward as i128;
            reward_n += 1;
        }
    }
    let global_mean = (reward_sum as f64 / reward_n as f64).round() as i64;
    let mut transition = vec![0.0; cube];
    let mut reward = vec![0i64; cube];
    for s in 0..num_states {
        for a in 0..num_actions {
            let row = idx(s, a, 0)..idx(s, a, 0) + num_states;
            let total: u64 = counts[row.clone()].iter().sum();
            let observed: Vec<i64> = reward_seen[row.clone()].iter().flatten().copied().collect();
            let row_mean = if observed.is_empty() {
                global_mean
            } else {
                (observed.iter().sum::<i64>() as f64 / observed.len() as f64).round() as i64
            };
            for i in row {
                transition[i] = if total == 0 { 1.0 / num_states as f64 } else { counts[i] as f64 / total as f64 };
                reward[i] = reward_seen[i].unwrap_or(row_mean);
            }
        }
    }
    let n_starts = train.len() as f64;
    let initial = starts.iter().map(|c| *c as f64 / n_starts).collect();
    MdpModel::new(num_states, num_actions, transition, reward, initial, horizon)
}

/// Monte-Carlo ratio of return frequencies under the two policies, with
/// `h` rollouts per policy and start state on the ML-estimated model.
pub fn monte_carlo_weight_table<R: Rng + ?Sized>(
    train: &[Trajectory],
    target: &Policy,
    behavior: &Policy,
    num_samples: usize,
    rng: &mut R,
) -> Result<WeightTable> {
    let model = estimate_model(train, target.num_states(), target.num_actions())?;
    monte_carlo_weights_from_model(&model, target, behavior, num_samples, rng)
}

/// Monte-Carlo weights on a given model. Both policies share one random
/// stream per start state, so identical policies give identical rollouts.
pub fn monte_carlo_weights_from_model<R: Rng + ?Sized>(
    model: &MdpModel,
    target: &Policy,
    behavior: &Policy,
    num_samples: usize,
    rng: &mut R,
) -> Result<WeightTable> {
    if num_samples == 0 {
        return Err(Error::InvalidParameter("Monte-Carlo sample count must be ≥ 1".into()));
    }
    let mut table = WeightTable::empty(DEFAULT_FALLBACK)?;
    for x in 0..model.num_states() {
        let seed: [u8; 32] = rng.gen();
        let histogram = |policy: &Policy| {
            let mut stream = ChaCha8Rng::from_seed(seed);
            let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
            for _ in 0..num_samples {
                *hist.entry(sample_trajectory(model, policy, x, &mut stream).total_return()).or_insert(0) += 1;
            }
            hist
        };
        let num = histogram(target);
        let den = histogram(behavior);
        for (&y, &d) in &den {
            let n = num.get(&y).copied().unwrap_or(0);
            table.insert(x, y, n as f64 / d as f64)?;
        }
    }
    Ok(table)
}

/// `Δ_w = ½ E_{πᵇ} |ŵ(X,Y) − w(X,Y)|`, summed exactly over the finite grid.
pub fn weight_gap_delta(
    table: &WeightTable,
    exact: &[BTreeMap<i64, f64>],
    behavior_returns: &[ReturnDistribution],
    start_dist: &[f64],
) -> f64 {
    let mut delta = 0.0;
    for (x, &px) in start_dist.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let dist = &behavior_returns[x];
        for (&y, &pb) in dist.support.iter().zip(&dist.pmf) {
            let w = exact[x].get(&y).copied().unwrap_or(0.0);
            delta += px * pb * 0.5 * (table.value_or_fallback(x, y) - w).abs();
        }
    }
    delta
}

/// Smallest bucket count `N(x, y)` over pairs with positive behavior
/// probability; zero when any such pair was never observed.
pub fn min_bucket_count(table: &WeightTable, behavior_returns: &[ReturnDistribution], start_dist: &[f64]) -> usize {
    let mut min = usize::MAX;
    for (x, &px) in start_dist.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for (&y, &pb) in behavior_returns[x].support.iter().zip(&behavior_returns[x].pmf) {
            if pb > 0.0 {
                min = min.min(table.count(x, y));
            }
        }
    }
    if min == usize::MAX {
        0
    } else {
        min
    }
}

/// Hoeffding-based bound on `Δ_w` for the empirical estimator:
/// `(M − m)|X||Y|√π / (2√(2 min N))`.
pub fn empirical_delta_bound(m: f64, big_m: f64, num_states: usize, num_returns: usize, min_count: usize) -> f64 {
    if min_count == 0 {
        return f64::INFINITY;
    }
    (big_m - m) * num_states as f64 * num_returns as f64 * std::f64::consts::PI.sqrt()
        / (2.0 * (2.0 * min_count as f64).sqrt())
}

/// Bucket size making `P(|ŵ − w| > ε) < δ` under the Hoeffding union bound.
pub fn hoeffding_min_count(m: f64, big_m: f64, eps: f64, delta: f64, num_states: usize, num_returns: usize) -> usize {
    let n = (big_m - m).powi(2) / (2.0 * eps * eps) * (2.0 * num_states as f64 * num_returns as f64 / delta).ln();
    n.ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{epsilon_greedy, sample_trajectory, Step};
    use crate::rng::stream;

    fn traj(steps: &[(usize, usize, i64)], final_state: usize) -> Trajectory {
        Trajectory {
            steps: steps.iter().map(|&(state, action, reward)| Step { state, action, reward }).collect(),
            final_state,
        }
    }

    #[test]
    fn ratio_identity_and_single_step() {
        let pi = Policy::new(1, 2, vec![0.6, 0.4]).unwrap();
        let pb = Policy::new(1, 2, vec![0.3, 0.7]).unwrap();
        let t = traj(&[(0, 0, 1)], 0);
        assert_eq!(trajectory_ratio(&t, &pi, &pi).unwrap().value(), 1.0);
        assert!((trajectory_ratio(&t, &pi, &pb).unwrap().value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_rejects_unsupported_action() {
        let pi = Policy::uniform(1, 2);
        let pb = Policy::deterministic(&[1], 2).unwrap();
        assert!(matches!(
            trajectory_ratio(&traj(&[(0, 0, 0)], 0), &pi, &pb),
            Err(Error::AbsoluteContinuity { state: 0, action: 0 })
        ));
    }

    #[test]
    fn ratio_long_greedy_trajectory() {
        let base = Policy::deterministic(&[3], 11).unwrap();
        let pi = epsilon_greedy(&base, 0.15, 11).unwrap();
        let pb = epsilon_greedy(&base, 0.4, 11).unwrap();
        let t = traj(&[(0, 3, 0); 20], 0);
        let got = trajectory_ratio(&t, &pi, &pb).unwrap().value();
        let mut direct = 1.0;
        for _ in 0..20 {
            direct *= pi.prob(0, 3) / pb.prob(0, 3);
        }
        assert!((got / direct - 1.0).abs() < 1e-9);
        assert!((pi.prob(0, 3) - 0.863_636_363_6).abs() < 1e-9);
    }

    #[test]
    fn bounds_closed_form() {
        assert_eq!(ratio_bounds(0.3, 0.3, 11, 7).unwrap(), (1.0, 1.0));
        let (m, big_m) = ratio_bounds(0.15, 0.4, 11, 1).unwrap();
        assert!((m - 0.375).abs() < 1e-15);
        assert!((big_m - 1.357_142_857_142_857).abs() < 1e-12);
        assert!(ratio_bounds(0.2, 0.0, 11, 1).is_err());
        assert_eq!(ratio_bounds(0.0, 0.0, 11, 1).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn bounds_hold_on_samples() {
        let m = crate::inventory::build_inventory_mdp(&crate::inventory::InventoryParams::instance1(20).with_capacity(4)).unwrap();
        let base = Policy::deterministic(&[2, 1, 0, 0, 0], 5).unwrap();
        let pb = epsilon_greedy(&base, 0.4, 5).unwrap();
        let mut rng = stream(5, "bounds");
        for eps in [0.15, 0.25, 0.5, 0.65] {
            let pi = epsilon_greedy(&base, eps, 5).unwrap();
            let (lo, hi) = ratio_bounds(eps, 0.4, 5, 20).unwrap();
            for i in 0..10_000 {
                let t = sample_trajectory(&m, &pb, i % 5, &mut rng);
                let r = trajectory_ratio(&t, &pi, &pb).unwrap().value();
                assert!(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn empirical_table_identity() {
        let t1 = traj(&[(0, 0, 1), (1, 1, 2)], 0);
        let t2 = traj(&[(0, 1, 2), (0, 1, 1)], 1);
        let t3 = traj(&[(1, 0, 0), (1, 1, 1)], 1);
        let pi = Policy::new(2, 2, vec![0.3, 0.7, 0.9, 0.1]).unwrap();
        let table = empirical_weight_table(&[t1.clone(), t2, t3], &pi, &pi).unwrap();
        assert!(table.entries().all(|(_, w)| w == 1.0));
        assert_eq!(table.count(0, 3), 2);

        let pb = Policy::uniform(2, 2);
        let single = empirical_weight_table(std::slice::from_ref(&t1), &pi, &pb).unwrap();
        let expect = trajectory_ratio(&t1, &pi, &pb).unwrap().value();
        assert_eq!(single.peek(0, 3), Some(expect));
        assert!(empirical_weight_table(&[], &pi, &pb).is_err());
    }

    #[test]
    fn fallback_counts_misses() {
        let table = WeightTable::empty(1.0).unwrap();
        assert_eq!(table.get(0, 5), 1.0);
        assert_eq!(table.value_or_fallback(0, 5), 1.0);
        assert_eq!(table.misses(), 1);
        table.reset_misses();
        assert_eq!(table.misses(), 0);
    }

    #[test]
    fn json_schema() {
        let mut table = WeightTable::empty(1.0).unwrap();
        table.insert(2, -7, 0.25).unwrap();
        table.get(9, 9);
        let text = table.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["entries"]["2:-7"], 0.25);
        assert_eq!(v["fallback"], 1.0);
        assert_eq!(v["miss_counter"], 1);
        let back = WeightTable::from_json(&text).unwrap();
        assert_eq!(back, table);
        assert_eq!(back.misses(), 1);
        assert!(WeightTable::from_json(r#"{"entries":{"x":1.0},"fallback":1.0,"miss_counter":0}"#).is_err());
        assert!(WeightTable::from_json(r#"{"entries":{"0:1":-1.0},"fallback":1.0,"miss_counter":0}"#).is_err());
    }

    #[test]
    fn monte_carlo_identity_and_degenerate() {
        let m = MdpModel::new(2, 2, vec![0.5, 0.5, 0.2, 0.8, 0.6, 0.4, 1.0, 0.0], vec![0, 1, 2, 0, 1, 1, 0, 3], vec![0.5, 0.5], 3)
            .unwrap();
        let pi = Policy::new(2, 2, vec![0.3, 0.7, 0.5, 0.5]).unwrap();
        let pb = Policy::uniform(2, 2);
        let same = monte_carlo_weights_from_model(&m, &pb, &pb, 500, &mut stream(1, "mc")).unwrap();
        assert!(same.entries().all(|(_, w)| w == 1.0));
        let h1 = monte_carlo_weights_from_model(&m, &pi, &pb, 1, &mut stream(1, "mc1")).unwrap();
        assert_eq!(h1.len(), 2);
        assert!(h1.entries().all(|(_, w)| w == 0.0 || w == 1.0));
        assert!(monte_carlo_weights_from_model(&m, &pi, &pb, 0, &mut stream(1, "mc1")).is_err());
    }

    #[test]
    fn estimated_model_rows_stochastic() {
        let t = traj(&[(0, 0, 1), (1, 1, 2)], 0);
        let m = estimate_model(&[t], 3, 2).unwrap();
        assert_eq!(m.transition(0, 0, 1), 1.0);
        assert_eq!(m.reward(0, 0, 1), 1);
        assert!((m.transition(2, 1, 0) - 1.0 / 3.0).abs() < 1e-15);
        // unobserved triple on a visited row reuses the row mean
        assert_eq!(m.reward(1, 1, 2), 2);
    }

    #[test]
    fn delta_single_atom() {
        let exact = vec![BTreeMap::from([(0, 1.0), (1, 1.0)])];
        let dist = vec![ReturnDistribution { support: vec![0, 1], pmf: vec![0.25, 0.75] }];
        let table = WeightTable::from_exact(&exact).unwrap();
        assert_eq!(weight_gap_delta(&table, &exact, &dist, &[1.0]), 0.0);
        let mut off = table.clone();
        off.insert(0, 0, 1.4).unwrap();
        assert!((weight_gap_delta(&off, &exact, &dist, &[1.0]) - 0.25 * 0.4 / 2.0).abs() < 1e-15);
    }
}
