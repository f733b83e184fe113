//! Tabular finite-horizon MDPs with deterministic integer rewards.
//!
//! Rewards are a function of `(state, action, next_state)`, so the return of a
//! horizon-`H` trajectory lives on a finite integer grid. That makes the exact
//! return law computable by a forward dynamic program over
//! `(step, state, accumulated return)`, which is what the oracles here do.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sample_index;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Sweep cap for [`value_iteration_discounted`].
pub const VALUE_ITERATION_CAP: usize = 1_000_000;

/// Largest `(states × return columns)` table the exact oracles will allocate.
pub const DEFAULT_GRID_CAP: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct MdpModel {
    num_states: usize,
    num_actions: usize,
    transition: Vec<f64>,
    reward: Vec<i64>,
    initial_dist: Vec<f64>,
    horizon: usize,
}

/// On-disk layout: nested arrays indexed `[state][action][next_state]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpDocument {
    num_states: usize,
    num_actions: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<Vec<i64>>>,
    initial_dist: Vec<f64>,
    horizon: usize,
}

impl TryFrom<MdpDocument> for MdpModel {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (ns, na) = (doc.num_states, doc.num_actions);
        let shape_ok = |t: &Vec<Vec<Vec<f64>>>| {
            t.len() == ns && t.iter().all(|r| r.len() == na && r.iter().all(|c| c.len() == ns))
        };
        if !shape_ok(&doc.transition) {
            return Err(Error::InvalidModel(format!(
                "transition must have shape [{ns}][{na}][{ns}]"
            )));
        }
        let reward_ok = doc.reward.len() == ns
            && doc.reward.iter().all(|r| r.len() == na && r.iter().all(|c| c.len() == ns));
        if !reward_ok {
            return Err(Error::InvalidModel(format!(
                "reward must have shape [{ns}][{na}][{ns}]"
            )));
        }
        MdpModel::new(
            ns,
            na,
            doc.transition.into_iter().flatten().flatten().collect(),
            doc.reward.into_iter().flatten().flatten().collect(),
            doc.initial_dist,
            doc.horizon,
        )
    }
}

impl From<MdpModel> for MdpDocument {
    fn from(m: MdpModel) -> Self {
        let (ns, na) = (m.num_states, m.num_actions);
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            flat.chunks(ns * na)
                .map(|s| s.chunks(ns).map(<[f64]>::to_vec).collect())
                .collect()
        };
        let reward = m
            .reward
            .chunks(ns * na)
            .map(|s| s.chunks(ns).map(<[i64]>::to_vec).collect())
            .collect();
        MdpDocument {
            num_states: ns,
            num_actions: na,
            transition: nest(&m.transition),
            reward,
            initial_dist: m.initial_dist,
            horizon: m.horizon,
        }
    }
}

impl MdpModel {
    /// Builds a model from flat `(state, action, next_state)`-major tables and
    /// validates it.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<i64>,
        initial_dist: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let model = Self::new_unchecked(num_states, num_actions, transition, reward, initial_dist, horizon)?;
        model.validate()?;
        Ok(model)
    }

    /// Like [`MdpModel::new`] but only checks table sizes, so malformed
    /// probabilities can be represented and reported by [`MdpModel::validate`].
    pub fn new_unchecked(
        num_states: usize,
        num_actions: usize,
        transition: Vec<f64>,
        reward: Vec<i64>,
        initial_dist: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let cube = num_states * num_actions * num_states;
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel("state and action spaces must be nonempty".into()));
        }
        if transition.len() != cube || reward.len() != cube {
            return Err(Error::InvalidModel(format!(
                "transition and reward tables need {cube} entries"
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::InvalidModel(format!(
                "initial_dist needs {num_states} entries, got {}",
                initial_dist.len()
            )));
        }
        Ok(Self { num_states, num_actions, transition, reward, initial_dist, horizon })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidModel("horizon must be ≥ 1".into()));
        }
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let row = self.transition_row(s, a);
                if let Some(ns) = row.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "transition (state {s}, action {a}, next_state {ns}) is {}",
                        row[ns]
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidModel(format!(
                        "transition row (state {s}, action {a}) sums to {sum}"
                    )));
                }
            }
        }
        if let Some(s) = self.initial_dist.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "initial_dist[{s}] is {}",
                self.initial_dist[s]
            )));
        }
        let sum: f64 = self.initial_dist.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!("initial_dist sums to {sum}")));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_initial_dist(mut self, initial_dist: Vec<f64>) -> Result<Self> {
        if initial_dist.len() != self.num_states {
            return Err(Error::InvalidModel("initial_dist length mismatch".into()));
        }
        self.initial_dist = initial_dist;
        self.validate()?;
        Ok(self)
    }

    #[inline]
    fn idx(&self, s: usize, a: usize, ns: usize) -> usize {
        (s * self.num_actions + a) * self.num_states + ns
    }

    #[inline]
    pub fn transition(&self, s: usize, a: usize, ns: usize) -> f64 {
        self.transition[self.idx(s, a, ns)]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize, ns: usize) -> i64 {
        self.reward[self.idx(s, a, ns)]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.idx(s, a, 0);
        &self.transition[start..start + self.num_states]
    }

    /// Smallest and largest reward over transitions with positive probability.
    pub fn reward_range(&self) -> (i64, i64) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for (p, r) in self.transition.iter().zip(&self.reward) {
            if *p > 0.0 {
                lo = lo.min(*r);
                hi = hi.max(*r);
            }
        }
        (lo, hi)
    }

    /// Integer grid containing every achievable horizon-`H` return.
    pub fn return_grid(&self) -> ReturnGrid {
        let (lo, hi) = self.reward_range();
        let h = self.horizon as i64;
        ReturnGrid::new(h * lo, h * hi)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Contiguous integer range of candidate returns, step 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnGrid {
    pub min: i64,
    pub max: i64,
}

impl ReturnGrid {
    pub fn new(min: i64, max: i64) -> Self {
        Self { min, max }
    }

    pub fn len(&self) -> usize {
        if self.max < self.min {
            0
        } else {
            (self.max - self.min + 1) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.min..=self.max
    }
}

/// Stochastic stationary policy, row-major `(state, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != num_states * num_actions {
            return Err(Error::InvalidPolicy(format!(
                "expected {} probabilities, got {}",
                num_states * num_actions,
                probs.len()
            )));
        }
        let policy = Self { num_states, num_actions, probs };
        for s in 0..num_states {
            let row = policy.row(s);
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!("state {s} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidPolicy(format!("row for state {s} sums to {sum}")));
            }
        }
        Ok(policy)
    }

    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::InvalidPolicy(format!("action {a} out of range in state {s}")));
            }
            probs[s * num_actions + a] = 1.0;
        }
        Self::new(actions.len(), num_actions, probs)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self { num_states, num_actions, probs: vec![p; num_states * num_actions] }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// The action played with probability one in `s`, if any.
    pub fn deterministic_action(&self, s: usize) -> Option<usize> {
        let row = self.row(s);
        let a = row.iter().position(|&p| p == 1.0)?;
        row.iter().enumerate().all(|(b, &p)| b == a || p == 0.0).then_some(a)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states).all(|s| self.deterministic_action(s).is_some())
    }

    fn check_compatible(&self, model: &MdpModel) -> Result<()> {
        if self.num_states != model.num_states || self.num_actions != model.num_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy is {}×{} but model is {}×{}",
                self.num_states, self.num_actions, model.num_states, model.num_actions
            )));
        }
        Ok(())
    }
}

/// Greedy deterministic policy for the discounted infinite-horizon problem.
///
/// Sweeps Bellman optimality backups until successive value vectors differ
/// by less than `tol` in max norm. Ties go to the lowest action index.
pub fn value_iteration_discounted(model: &MdpModel, gamma: f64, tol: f64) -> Result<Policy> {
    value_iteration_capped(model, gamma, tol, VALUE_ITERATION_CAP)
}

pub fn value_iteration_capped(model: &MdpModel, gamma: f64, tol: f64, max_sweeps: usize) -> Result<Policy> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let ns = model.num_states;
    let mut v = vec![0.0; ns];
    let mut next = vec![0.0; ns];
    for _ in 0..max_sweeps {
        for s in 0..ns {
            next[s] = (0..model.num_actions)
                .map(|a| q_value(model, &v, gamma, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let diff = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        if diff < tol {
            let actions: Vec<usize> = (0..ns).map(|s| greedy_action(model, &v, gamma, s)).collect();
            return Policy::deterministic(&actions, model.num_actions);
        }
    }
    Err(Error::NoConvergence { iterations: max_sweeps })
}

fn q_value(model: &MdpModel, v: &[f64], gamma: f64, s: usize, a: usize) -> f64 {
    let row = model.transition_row(s, a);
    row.iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(ns, p)| p * (model.reward(s, a, ns) as f64 + gamma * v[ns]))
        .sum()
}

fn greedy_action(model: &MdpModel, v: &[f64], gamma: f64, s: usize) -> usize {
    let mut best = 0;
    let mut best_q = q_value(model, v, gamma, s, 0);
    for a in 1..model.num_actions {
        let q = q_value(model, v, gamma, s, a);
        if q > best_q {
            best = a;
            best_q = q;
        }
    }
    best
}

/// Mixes a deterministic policy with the uniform one:
/// `π(a|x) = ε/|A| + (1−ε)·1{a = base(x)}`.
pub fn epsilon_greedy(base: &Policy, epsilon: f64, num_actions: usize) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0,1], got {epsilon}")));
    }
    if base.num_actions != num_actions {
        return Err(Error::InvalidPolicy(format!(
            "base policy has {} actions, expected {num_actions}",
            base.num_actions
        )));
    }
    let spread = epsilon / num_actions as f64;
    let mut probs = Vec::with_capacity(base.probs.len());
    for s in 0..base.num_states {
        let greedy = base
            .deterministic_action(s)
            .ok_or_else(|| Error::InvalidPolicy(format!("base policy is not deterministic in state {s}")))?;
        probs.extend((0..num_actions).map(|a| if a == greedy { spread + (1.0 - epsilon) } else { spread }));
    }
    Ok(Policy { num_states: base.num_states, num_actions, probs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub final_state: usize,
}

impl Trajectory {
    pub fn start_state(&self) -> usize {
        self.steps[0].state
    }

    pub fn total_return(&self) -> i64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// Rolls out one horizon-`H` trajectory from `start_state`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &MdpModel,
    policy: &Policy,
    start_state: usize,
    rng: &mut R,
) -> Trajectory {
    let mut steps = Vec::with_capacity(model.horizon);
    let mut state = start_state;
    for _ in 0..model.horizon {
        let action = sample_index(policy.row(state), rng);
        let next = sample_index(model.transition_row(state, action), rng);
        steps.push(Step { state, action, reward: model.reward(state, action, next) });
        state = next;
    }
    Trajectory { steps, final_state: state }
}

/// Draws the start state from the model's initial distribution, then rolls out.
pub fn sample_episode<R: Rng + ?Sized>(model: &MdpModel, policy: &Policy, rng: &mut R) -> Trajectory {
    let start = sample_index(&model.initial_dist, rng);
    sample_trajectory(model, policy, start, rng)
}

/// Law of the return `Y = Σ r_t` given the start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnDistribution {
    pub support: Vec<i64>,
    pub pmf: Vec<f64>,
}

impl ReturnDistribution {
    pub fn prob(&self, y: i64) -> f64 {
        match self.support.binary_search(&y) {
            Ok(i) => self.pmf[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.pmf).map(|(y, p)| *y as f64 * p).sum()
    }

    /// Smallest support point with cumulative mass ≥ `level`.
    pub fn quantile(&self, level: f64) -> i64 {
        let mut acc = 0.0;
        for (y, p) in self.support.iter().zip(&self.pmf) {
            acc += p;
            if crate::quantile::reaches(acc, level, 1.0) {
                return *y;
            }
        }
        *self.support.last().expect("nonempty support")
    }
}

/// Per start state: a list of `(next_state, reward, probability)` moves with
/// the action already marginalised out under `policy`.
fn policy_moves(model: &MdpModel, policy: &Policy) -> Vec<Vec<(usize, i64, f64)>> {
    (0..model.num_states)
        .map(|s| {
            let mut merged: BTreeMap<(usize, i64), f64> = BTreeMap::new();
            for a in 0..model.num_actions {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (ns, &pt) in model.transition_row(s, a).iter().enumerate() {
                    if pt > 0.0 {
                        *merged.entry((ns, model.reward(s, a, ns))).or_insert(0.0) += pa * pt;
                    }
                }
            }
            merged.into_iter().map(|((ns, r), p)| (ns, r, p)).collect()
        })
        .collect()
}

/// Exact return law from `start_state`, by forward DP over accumulated return.
pub fn exact_return_distribution(model: &MdpModel, policy: &Policy, start_state: usize) -> Result<ReturnDistribution> {
    exact_return_distribution_capped(model, policy, start_state, DEFAULT_GRID_CAP)
}

pub fn exact_return_distribution_capped(
    model: &MdpModel,
    policy: &Policy,
    start_state: usize,
    grid_cap: usize,
) -> Result<ReturnDistribution> {
    policy.check_compatible(model)?;
    if start_state >= model.num_states {
        return Err(Error::InvalidParameter(format!("start state {start_state} out of range")));
    }
    let ns = model.num_states;
    let (rmin, rmax) = model.reward_range();
    let h = model.horizon;
    let span = (rmax - rmin) as usize;
    let cols = h * span + 1;
    let cells = cols.saturating_mul(ns);
    if cells > grid_cap {
        return Err(Error::GridOverflow { cells, cap: grid_cap });
    }
    let moves = policy_moves(model, policy);

    // Column index at step t is (accumulated return − t·rmin).
    let mut cur = vec![0.0; ns * cols];
    let mut nxt = vec![0.0; ns * cols];
    cur[start_state * cols] = 1.0;
    for t in 0..h {
        nxt.iter_mut().for_each(|x| *x = 0.0);
        let width = t * span + 1;
        for s in 0..ns {
            let base = s * cols;
            for c in 0..width {
                let m = cur[base + c];
                if m == 0.0 {
                    continue;
                }
                for &(next, r, p) in &moves[s] {
                    nxt[next * cols + c + (r - rmin) as usize] += m * p;
                }
            }
        }
        std::mem::swap(&mut cur, &mut nxt);
    }

    let mut support = Vec::new();
    let mut pmf = Vec::new();
    let offset = h as i64 * rmin;
    for c in 0..cols {
        let mass: f64 = (0..ns).map(|s| cur[s * cols + c]).sum();
        if mass > 0.0 {
            support.push(c as i64 + offset);
            pmf.push(mass);
        }
    }
    Ok(ReturnDistribution { support, pmf })
}

/// `V_H^π(x)`: the mean of the exact return law.
pub fn exact_value(model: &MdpModel, policy: &Policy, start_state: usize) -> Result<f64> {
    Ok(exact_return_distribution(model, policy, start_state)?.mean())
}

/// `V_H^π` for every start state via the backward Bellman recursion.
pub fn backward_values(model: &MdpModel, policy: &Policy) -> Result<Vec<f64>> {
    policy.check_compatible(model)?;
    let moves = policy_moves(model, policy);
    let mut v = vec![0.0; model.num_states];
    for _ in 0..model.horizon {
        v = moves
            .iter()
            .map(|mv| mv.iter().map(|&(ns, r, p)| p * (r as f64 + v[ns])).sum())
            .collect();
    }
    Ok(v)
}

/// Rejects target policies that play an action the behavior policy never plays.
pub fn check_absolute_continuity(target: &Policy, behavior: &Policy) -> Result<()> {
    if target.num_states != behavior.num_states || target.num_actions != behavior.num_actions {
        return Err(Error::InvalidPolicy("target and behavior policies differ in shape".into()));
    }
    for s in 0..target.num_states {
        for a in 0..target.num_actions {
            if behavior.prob(s, a) == 0.0 && target.prob(s, a) > 0.0 {
                return Err(Error::AbsoluteContinuity { state: s, action: a });
            }
        }
    }
    Ok(())
}

/// True likelihood ratio `w(x, y) = P^π(y|x) / P^{πᵇ}(y|x)` on the behavior
/// support.
pub fn exact_weights(
    model: &MdpModel,
    target: &Policy,
    behavior: &Policy,
    start_state: usize,
) -> Result<BTreeMap<i64, f64>> {
    check_absolute_continuity(target, behavior)?;
    let pt = exact_return_distribution(model, target, start_state)?;
    let pb = exact_return_distribution(model, behavior, start_state)?;
    ratio_on_support(&pt, &pb, start_state)
}

pub(crate) fn ratio_on_support(
    target: &ReturnDistribution,
    behavior: &ReturnDistribution,
    start_state: usize,
) -> Result<BTreeMap<i64, f64>> {
    if let Some(y) = target.support.iter().zip(&target.pmf).find(|(y, p)| **p > 0.0 && behavior.prob(**y) == 0.0) {
        return Err(Error::SupportMismatch { state: start_state, ret: *y.0 });
    }
    Ok(behavior
        .support
        .iter()
        .zip(&behavior.pmf)
        .map(|(y, pb)| (*y, target.prob(*y) / pb))
        .collect())
}
