//! Single-item inventory control as a tabular MDP.
//!
//! The stock level `x ∈ {0..N}` is the state and the order size `a ∈ {0..N}`
//! the action. Demand `o ~ Poisson(λ)` arrives after ordering, giving
//! `x' = max(0, min(N, x + a) − o)` and the next-state-dependent reward
//! `−k·1{a>0} − z·x − c·(min(N, x+a) − x) + p·(min(N, x+a) − x')`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpModel;

pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Uniform,
    Point(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InventoryParams {
    pub capacity: usize,
    pub fixed_order_cost: i64,
    pub unit_cost: i64,
    pub holding_cost: i64,
    pub unit_price: i64,
    pub demand_rate: f64,
    /// Zero in experiment configs, where the top-level horizon applies.
    #[serde(default)]
    pub horizon: usize,
    #[serde(default = "default_eps")]
    pub demand_truncation_eps: f64,
    #[serde(default)]
    pub initial: InitialState,
}

fn default_eps() -> f64 {
    DEFAULT_TRUNCATION_EPS
}

impl InventoryParams {
    /// `N=10, k=1, c=2, z=2, p=4, λ=10`.
    pub fn instance1(horizon: usize) -> Self {
        Self {
            capacity: 10,
            fixed_order_cost: 1,
            unit_cost: 2,
            holding_cost: 2,
            unit_price: 4,
            demand_rate: 10.0,
            horizon,
            demand_truncation_eps: DEFAULT_TRUNCATION_EPS,
            initial: InitialState::Uniform,
        }
    }

    /// Instance 1 with a heavier fixed order cost and lower demand: `k=3, λ=6`.
    pub fn instance2(horizon: usize) -> Self {
        Self { fixed_order_cost: 3, demand_rate: 6.0, ..Self::instance1(horizon) }
    }

    pub fn with_capacity(self, capacity: usize) -> Self {
        Self { capacity, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.capacity < 1 {
            return bad("capacity must be ≥ 1".into());
        }
        if self.fixed_order_cost < 0 || self.unit_cost < 0 || self.holding_cost < 0 {
            return bad("order, unit and holding costs must be ≥ 0".into());
        }
        if self.unit_price <= self.holding_cost {
            return bad(format!(
                "unit price ({}) must exceed holding cost ({})",
                self.unit_price, self.holding_cost
            ));
        }
        if !(self.demand_rate > 0.0 && self.demand_rate.is_finite()) {
            return bad(format!("demand rate must be positive, got {}", self.demand_rate));
        }
        if !(self.demand_truncation_eps > 0.0 && self.demand_truncation_eps < 1.0) {
            return bad("demand truncation eps must lie in (0,1)".into());
        }
        if self.horizon < 1 {
            return bad("horizon must be ≥ 1".into());
        }
        if let InitialState::Point(s) = self.initial {
            if s > self.capacity {
                return bad(format!("initial state {s} exceeds capacity {}", self.capacity));
            }
        }
        Ok(())
    }

    /// Reward of one round; depends on the next stock level through the
    /// number of items sold.
    pub fn reward(&self, x: usize, a: usize, next: usize) -> i64 {
        let stocked = self.capacity.min(x + a);
        let sold = stocked.saturating_sub(next) as i64;
        let order_fee = if a > 0 { self.fixed_order_cost } else { 0 };
        -order_fee - self.holding_cost * x as i64 - self.unit_cost * (stocked - x) as i64
            + self.unit_price * sold
    }
}

/// Poisson pmf on `{0..O_max}` where `O_max` is the smallest cutoff whose
/// untruncated tail mass falls below `eps`, renormalised to sum to one.
pub fn truncated_poisson_pmf(lambda: f64, eps: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("Poisson rate must be positive, got {lambda}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("tail threshold must lie in (0,1), got {eps}")));
    }
    let ln_lambda = lambda.ln();
    let mut log_p = -lambda;
    let mut pmf = Vec::new();
    let mut cdf = 0.0;
    let mut k = 0u32;
    loop {
        let p = log_p.exp();
        pmf.push(p);
        cdf += p;
        if 1.0 - cdf < eps {
            break;
        }
        k += 1;
        log_p += ln_lambda - (k as f64).ln();
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    Ok(pmf)
}

pub fn build_inventory_mdp(params: &InventoryParams) -> Result<MdpModel> {
    params.validate()?;
    let demand = truncated_poisson_pmf(params.demand_rate, params.demand_truncation_eps)?;
    let n = params.capacity;
    let ns = n + 1;
    let mut transition = vec![0.0; ns * ns * ns];
    let mut reward = vec![0i64; ns * ns * ns];
    for x in 0..ns {
        for a in 0..ns {
            let stocked = n.min(x + a);
            let base = (x * ns + a) * ns;
            for (o, p) in demand.iter().enumerate() {
                transition[base + stocked.saturating_sub(o)] += p;
            }
            for next in 0..ns {
                reward[base + next] = params.reward(x, a, next);
            }
        }
    }
    let initial = match params.initial {
        InitialState::Uniform => vec![1.0 / ns as f64; ns],
        InitialState::Point(s) => {
            let mut v = vec![0.0; ns];
            v[s] = 1.0;
            v
        }
    };
    MdpModel::new(ns, ns, transition, reward, initial, params.horizon)
}
