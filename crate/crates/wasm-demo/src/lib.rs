//! Browser bindings: per-state conformal intervals, a coverage sweep over
//! target ε, and exact return laws with their likelihood ratios.
//!
//! Every export takes and returns JSON text. The `*_json` functions hold the
//! logic and run natively as well.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use conformal_ope::conformal::{CalibrationSet, PreparedConformal, ScoreKind};
use conformal_ope::experiment::{
    build_weight_table, run_experiment, ExperimentConfig, Method, SeedData, Setup, WeightEstimator,
};
use conformal_ope::inventory::InventoryParams;
use conformal_ope::mdp::exact_return_distribution;
use conformal_ope::report::aggregate;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemoParams {
    pub capacity: usize,
    pub fixed_order_cost: i64,
    pub demand_rate: f64,
    pub horizon: usize,
    pub epsilon: f64,
    pub epsilon_b: f64,
    pub alpha: f64,
    pub num_train: usize,
    pub num_cal: usize,
    pub num_test: usize,
    pub num_seeds: usize,
    pub seed: u64,
    pub estimator: WeightEstimator,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            capacity: 4,
            fixed_order_cost: 1,
            demand_rate: 10.0,
            horizon: 6,
            epsilon: 0.65,
            epsilon_b: 0.4,
            alpha: 0.1,
            num_train: 2000,
            num_cal: 2000,
            num_test: 300,
            num_seeds: 2,
            seed: 0,
            estimator: WeightEstimator::Empirical,
        }
    }
}

impl DemoParams {
    fn config(&self, methods: Vec<Method>, epsilon_grid: Vec<f64>) -> ExperimentConfig {
        let params = InventoryParams {
            fixed_order_cost: self.fixed_order_cost,
            demand_rate: self.demand_rate,
            ..InventoryParams::instance1(0).with_capacity(self.capacity)
        };
        let mut c = ExperimentConfig::inventory(params, "demo", self.horizon);
        c.epsilon_b = self.epsilon_b;
        c.epsilon_grid = epsilon_grid;
        c.alpha = self.alpha;
        c.num_train = self.num_train;
        c.num_cal = self.num_cal;
        c.num_test = self.num_test;
        c.num_seeds = self.num_seeds;
        c.master_seed = self.seed;
        c.methods = methods;
        c.weight_estimator = self.estimator;
        c.bootstrap.num_resamples = 200;
        c
    }
}

fn parse(json: &str) -> Result<DemoParams, String> {
    if json.trim().is_empty() {
        return Ok(DemoParams::default());
    }
    serde_json::from_str(json).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct StateIntervals {
    pub state: usize,
    pub method: &'static str,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
    pub target_lo: i64,
    pub target_hi: i64,
}

/// Conformal intervals for every start state at one target ε, next to the
/// exact `α/2` and `1 − α/2` quantiles of the target return law.
pub fn intervals_json(params: &str) -> Result<String, String> {
    let p = parse(params)?;
    let config = p.config(vec![Method::Pinball, Method::DoubleQuantile, Method::ShiftedValues], vec![p.epsilon]);
    let run = || -> conformal_ope::Result<Vec<StateIntervals>> {
        let setup = Setup::new(&config)?;
        let data = SeedData::generate(&config, &setup, 0)?;
        let target = setup.target(p.epsilon)?;
        let table = build_weight_table(&config, &setup, &data, &target, 0, p.epsilon)?;
        let cal = CalibrationSet::from_table(data.cal.clone(), &table);
        let grid = setup.model.return_grid();
        let mut out = Vec::new();
        for (name, kind) in [
            ("pinball", ScoreKind::Pinball),
            ("double_quantile", ScoreKind::DoubleQuantile),
            ("shifted_values", ScoreKind::ShiftedValues),
        ] {
            let prepared = PreparedConformal::new(kind, &cal, Some(&data.quantiles), p.alpha)?;
            for x in 0..setup.model.num_states() {
                let set = prepared.interval(x, grid, |y| table.value_or_fallback(x, y));
                let truth = exact_return_distribution(&setup.model, &target, x)?;
                out.push(StateIntervals {
                    state: x,
                    method: name,
                    lower: set.lower(),
                    upper: set.upper(),
                    target_lo: truth.quantile(p.alpha / 2.0),
                    target_hi: truth.quantile(1.0 - p.alpha / 2.0),
                });
            }
        }
        Ok(out)
    };
    let out = run().map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub method: &'static str,
    pub epsilon: f64,
    pub coverage: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
}

/// Seed-averaged coverage and extents of every method over a fixed ε grid.
pub fn coverage_sweep_json(params: &str) -> Result<String, String> {
    let p = parse(params)?;
    let config = p.config(Method::ALL.to_vec(), vec![0.15, 0.25, 0.4, 0.5, 0.65]);
    let results = run_experiment(&config).map_err(|e| e.to_string())?;
    let points: Vec<SweepPoint> = aggregate(&results)
        .into_iter()
        .flat_map(|(m, cells)| {
            cells.into_iter().map(move |(eps, a)| SweepPoint {
                method: m.name(),
                epsilon: eps,
                coverage: a.coverage,
                mean_lower: a.mean_lower,
                mean_upper: a.mean_upper,
            })
        })
        .collect();
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct ExactLaws {
    pub state: usize,
    pub support: Vec<i64>,
    pub behavior: Vec<f64>,
    pub target: Vec<f64>,
    pub weight: Vec<Option<f64>>,
}

/// Exact return pmfs of both policies from one start state over their joint
/// support, with `w(x, y)` where the behavior law has mass.
pub fn exact_laws_json(params: &str, state: usize) -> Result<String, String> {
    let p = parse(params)?;
    let config = p.config(vec![Method::Pinball], vec![p.epsilon]);
    let run = || -> conformal_ope::Result<ExactLaws> {
        let setup = Setup::new(&config)?;
        if state >= setup.model.num_states() {
            return Err(conformal_ope::Error::InvalidParameter(format!("state {state} out of range")));
        }
        let target = setup.target(p.epsilon)?;
        let b = exact_return_distribution(&setup.model, &setup.behavior, state)?;
        let t = exact_return_distribution(&setup.model, &target, state)?;
        let mut support: Vec<i64> = b.support.iter().chain(&t.support).copied().collect();
        support.sort_unstable();
        support.dedup();
        let behavior: Vec<f64> = support.iter().map(|&y| b.prob(y)).collect();
        let target: Vec<f64> = support.iter().map(|&y| t.prob(y)).collect();
        let weight = behavior.iter().zip(&target).map(|(pb, pt)| (*pb > 0.0).then(|| pt / pb)).collect();
        Ok(ExactLaws { state, support, behavior, target, weight })
    };
    let out = run().map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn intervals(params: &str) -> Result<String, JsValue> {
    intervals_json(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn coverage_sweep(params: &str) -> Result<String, JsValue> {
    coverage_sweep_json(params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn exact_laws(params: &str, state: usize) -> Result<String, JsValue> {
    exact_laws_json(params, state).map_err(|e| JsValue::from_str(&e))
}
