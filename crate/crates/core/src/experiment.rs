//! Configuration-driven experiment runner.
//!
//! A run sweeps the grid `method × ε × seed`. For each seed, training and
//! calibration trajectories are drawn under the behavior policy; for each
//! `(seed, ε)` the weight table, calibration weights and test points are
//! built; every method is then scored on the same test points. Each random
//! stream is keyed by a cell identifier, so any single cell can be rerun in
//! isolation with identical output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{qis_bootstrap_interval, BootstrapParams};
use crate::conformal::{standard_split_cp, CalibrationSet, PreparedConformal, ScoreKind};
use crate::error::{Error, Result};
use crate::inventory::{build_inventory_mdp, InventoryParams};
use crate::mdp::{
    epsilon_greedy, exact_return_distribution_capped, sample_episode, sample_trajectory, value_iteration_discounted,
    MdpModel, Policy, ReturnDistribution, ReturnGrid, Trajectory, DEFAULT_GRID_CAP,
};
use crate::quantile::{fit_state_quantiles, QuantilePair};
use crate::rng::{sample_index, stream};
use crate::weights::{empirical_weight_table, monte_carlo_weight_table, WeightTable};

pub const VALUE_ITERATION_TOL: f64 = 1e-9;
pub const PAPER_SCALE_SEEDS: usize = 30;
pub const PAPER_SCALE_TESTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DoubleQuantile,
    Pinball,
    QisBootstrap,
    ShiftedValues,
    StandardCp,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::DoubleQuantile, Method::Pinball, Method::QisBootstrap, Method::ShiftedValues, Method::StandardCp];

    pub fn name(self) -> &'static str {
        match self {
            Method::DoubleQuantile => "double_quantile",
            Method::Pinball => "pinball",
            Method::QisBootstrap => "qis_bootstrap",
            Method::ShiftedValues => "shifted_values",
            Method::StandardCp => "standard_cp",
        }
    }

    pub fn is_conformal(self) -> bool {
        self != Method::QisBootstrap
    }

    fn score_kind(self) -> Option<ScoreKind> {
        match self {
            Method::Pinball => Some(ScoreKind::Pinball),
            Method::DoubleQuantile => Some(ScoreKind::DoubleQuantile),
            Method::ShiftedValues => Some(ScoreKind::ShiftedValues),
            _ => None,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightEstimator {
    ExactOracle,
    #[default]
    Empirical,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Environment {
    Inventory(InventoryParams),
    /// Path to a model JSON document, relative to the config file.
    ModelFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: Environment,
    #[serde(default = "default_instance")]
    pub instance: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_epsilon_b")]
    pub epsilon_b: f64,
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub horizon: usize,
    #[serde(default = "default_num_train")]
    pub num_train: usize,
    #[serde(default = "default_num_cal")]
    pub num_cal: usize,
    #[serde(default = "default_num_test")]
    pub num_test: usize,
    #[serde(default = "default_num_seeds")]
    pub num_seeds: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub weight_estimator: WeightEstimator,
    #[serde(default = "default_monte_carlo_samples")]
    pub monte_carlo_samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub bootstrap: BootstrapParams,
    #[serde(default = "default_grid_cap")]
    pub grid_cap: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_instance() -> String {
    "instance1".into()
}
fn default_gamma() -> f64 {
    0.99
}
fn default_epsilon_b() -> f64 {
    0.4
}
fn default_epsilon_grid() -> Vec<f64> {
    vec![0.15, 0.25, 0.4, 0.5, 0.65]
}
fn default_alpha() -> f64 {
    0.1
}
fn default_num_train() -> usize {
    20_000
}
fn default_num_cal() -> usize {
    20_000
}
fn default_num_test() -> usize {
    500
}
fn default_num_seeds() -> usize {
    5
}
fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_monte_carlo_samples() -> usize {
    10_000
}
fn default_grid_cap() -> usize {
    DEFAULT_GRID_CAP
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// A config over the given inventory parameters with every other field at its default.
    pub fn inventory(params: InventoryParams, instance: &str, horizon: usize) -> Self {
        Self {
            environment: Environment::Inventory(params),
            instance: instance.into(),
            gamma: default_gamma(),
            epsilon_b: default_epsilon_b(),
            epsilon_grid: default_epsilon_grid(),
            alpha: default_alpha(),
            horizon,
            num_train: default_num_train(),
            num_cal: default_num_cal(),
            num_test: default_num_test(),
            num_seeds: default_num_seeds(),
            methods: default_methods(),
            weight_estimator: WeightEstimator::default(),
            monte_carlo_samples: default_monte_carlo_samples(),
            master_seed: 0,
            bootstrap: BootstrapParams::default(),
            grid_cap: default_grid_cap(),
            out_dir: default_out_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; a relative model path is resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        if let Environment::ModelFile(model) = &mut config.environment {
            if model.is_relative() {
                if let Some(dir) = path.parent() {
                    *model = dir.join(&*model);
                }
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn with_paper_scale(mut self) -> Self {
        self.num_seeds = PAPER_SCALE_SEEDS;
        self.num_test = PAPER_SCALE_TESTS;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epsilon_grid.is_empty() {
            return fail("epsilon_grid must not be empty".into());
        }
        if let Some(e) = self.epsilon_grid.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return fail(format!("epsilon_grid values must lie in [0,1], got {e}"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_b) || self.epsilon_b == 0.0 {
            return fail(format!("epsilon_b must lie in (0,1], got {}", self.epsilon_b));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        for (name, v) in [
            ("horizon", self.horizon),
            ("num_train", self.num_train),
            ("num_cal", self.num_cal),
            ("num_test", self.num_test),
            ("num_seeds", self.num_seeds),
            ("monte_carlo_samples", self.monte_carlo_samples),
        ] {
            if v < 1 {
                return fail(format!("{name} ≥ 1 required"));
            }
        }
        if self.methods.is_empty() {
            return fail("methods must not be empty".into());
        }
        self.bootstrap.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Environment::Inventory(p) = &self.environment {
            if p.horizon != 0 && p.horizon != self.horizon {
                return fail(format!("environment horizon {} disagrees with horizon {}", p.horizon, self.horizon));
            }
            InventoryParams { horizon: self.horizon, ..p.clone() }.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<MdpModel> {
        match &self.environment {
            Environment::Inventory(p) => build_inventory_mdp(&InventoryParams { horizon: self.horizon, ..p.clone() }),
            Environment::ModelFile(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read model {}: {e}", path.display())))?;
                MdpModel::from_json(&text)?.with_horizon(self.horizon)
            }
        }
    }
}

/// One `(method, ε, seed)` cell of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: Method,
    pub epsilon: f64,
    pub seed: usize,
    pub horizon: usize,
    pub instance: String,
    pub coverage: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub mean_length: f64,
    pub miss_count: u64,
    pub noncontiguous_count: usize,
}

fn eps_id(eps: f64) -> String {
    format!("{eps:.6}")
}

/// Environment, optimal policy and behavior policy shared by every cell.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: MdpModel,
    pub optimal: Policy,
    pub behavior: Policy,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = config.build_model()?;
        let optimal = value_iteration_discounted(&model, config.gamma, VALUE_ITERATION_TOL)?;
        let behavior = epsilon_greedy(&optimal, config.epsilon_b, model.num_actions())?;
        Ok(Self { model, optimal, behavior })
    }

    pub fn target(&self, eps: f64) -> Result<Policy> {
        epsilon_greedy(&self.optimal, eps, self.model.num_actions())
    }
}

/// Behavior-policy data of one seed, shared across ε.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub train: Vec<Trajectory>,
    pub cal: Vec<(usize, i64)>,
    pub quantiles: QuantilePair,
}

impl SeedData {
    pub fn generate(config: &ExperimentConfig, setup: &Setup, seed: usize) -> Result<Self> {
        let mut rng = stream(config.master_seed, &format!("seed={seed}/train"));
        let train: Vec<Trajectory> =
            (0..config.num_train).map(|_| sample_episode(&setup.model, &setup.behavior, &mut rng)).collect();
        let mut rng = stream(config.master_seed, &format!("seed={seed}/cal"));
        let cal = (0..config.num_cal)
            .map(|_| {
                let t = sample_episode(&setup.model, &setup.behavior, &mut rng);
                (t.start_state(), t.total_return())
            })
            .collect();
        Self::from_parts(config, setup, train, cal)
    }

    /// Fits the quantiles from `train` alone; `cal` is carried through untouched.
    pub fn from_parts(
        config: &ExperimentConfig,
        setup: &Setup,
        train: Vec<Trajectory>,
        cal: Vec<(usize, i64)>,
    ) -> Result<Self> {
        let pairs: Vec<(usize, i64)> = train.iter().map(|t| (t.start_state(), t.total_return())).collect();
        let (lo, hi) = QuantilePair::default_levels(config.alpha);
        let quantiles = fit_state_quantiles(&pairs, setup.model.num_states(), lo, hi)?;
        Ok(Self { train, cal, quantiles })
    }
}

/// Exact per-state weights for one target policy.
pub fn exact_weight_maps(
    model: &MdpModel,
    target: &Policy,
    behavior: &Policy,
    grid_cap: usize,
) -> Result<Vec<BTreeMap<i64, f64>>> {
    crate::mdp::check_absolute_continuity(target, behavior)?;
    (0..model.num_states())
        .map(|x| {
            let pt = exact_return_distribution_capped(model, target, x, grid_cap)?;
            let pb = exact_return_distribution_capped(model, behavior, x, grid_cap)?;
            crate::mdp::ratio_on_support(&pt, &pb, x)
        })
        .collect()
}

/// Weight table for one `(seed, ε)` under the configured estimator.
pub fn build_weight_table(
    config: &ExperimentConfig,
    setup: &Setup,
    data: &SeedData,
    target: &Policy,
    seed: usize,
    eps: f64,
) -> Result<WeightTable> {
    match config.weight_estimator {
        WeightEstimator::Empirical => empirical_weight_table(&data.train, target, &setup.behavior),
        WeightEstimator::MonteCarlo => {
            let mut rng = stream(config.master_seed, &format!("seed={seed}/eps={}/monte_carlo", eps_id(eps)));
            monte_carlo_weight_table(&data.train, target, &setup.behavior, config.monte_carlo_samples, &mut rng)
        }
        WeightEstimator::ExactOracle => {
            WeightTable::from_exact(&exact_weight_maps(&setup.model, target, &setup.behavior, config.grid_cap)?)
        }
    }
}

/// Test points `(x_test, Y)` with a fresh target-policy return per point.
pub fn sample_test_points(
    config: &ExperimentConfig,
    setup: &Setup,
    target: &Policy,
    seed: usize,
    eps: f64,
) -> Vec<(usize, i64)> {
    let mut rng = stream(config.master_seed, &format!("seed={seed}/eps={}/test", eps_id(eps)));
    (0..config.num_test)
        .map(|_| {
            let x = sample_index(setup.model.initial_dist(), &mut rng);
            (x, sample_trajectory(&setup.model, target, x, &mut rng).total_return())
        })
        .collect()
}

/// Everything one `(seed, ε)` pair needs, shared by all methods.
pub struct EpsilonContext {
    pub seed: usize,
    pub epsilon: f64,
    pub table: WeightTable,
    pub calibration: CalibrationSet,
    pub tests: Vec<(usize, i64)>,
    pub miss_count: u64,
}

impl EpsilonContext {
    pub fn new(
        config: &ExperimentConfig,
        setup: &Setup,
        data: &SeedData,
        seed: usize,
        eps: f64,
        table: WeightTable,
    ) -> Result<Self> {
        let target = setup.target(eps)?;
        table.reset_misses();
        let calibration = CalibrationSet::from_table(data.cal.clone(), &table);
        let miss_count = table.misses();
        let tests = sample_test_points(config, setup, &target, seed, eps);
        Ok(Self { seed, epsilon: eps, table, calibration, tests, miss_count })
    }
}

/// Reported extent of one method's set at one start state.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Extent {
    lower: f64,
    upper: f64,
    contiguous: bool,
}

impl Extent {
    fn contains(&self, y: i64) -> bool {
        self.lower <= y as f64 && y as f64 <= self.upper
    }
}

fn state_extents(
    method: Method,
    config: &ExperimentConfig,
    setup: &Setup,
    data: &SeedData,
    ctx: &EpsilonContext,
    needed: &[bool],
) -> Result<Vec<Option<Extent>>> {
    let grid: ReturnGrid = setup.model.return_grid();
    let from_set = |set: crate::conformal::ConformalInterval| {
        Some(Extent { lower: set.lower()? as f64, upper: set.upper()? as f64, contiguous: set.is_contiguous() })
    };
    let mut out = vec![None; needed.len()];
    match method {
        Method::StandardCp => {
            for x in (0..needed.len()).filter(|&x| needed[x]) {
                out[x] = from_set(standard_split_cp(x, &data.cal, &data.quantiles, config.alpha, grid)?);
            }
        }
        Method::QisBootstrap => {
            let (lo, hi) = QuantilePair::default_levels(config.alpha);
            for x in (0..needed.len()).filter(|&x| needed[x]) {
                let id = format!("seed={}/eps={}/qis/x={x}", ctx.seed, eps_id(ctx.epsilon));
                let mut rng = stream(config.master_seed, &id);
                out[x] = match qis_bootstrap_interval(x, &ctx.calibration, lo, hi, config.bootstrap, &mut rng) {
                    Ok(q) => Some(Extent { lower: q.lower, upper: q.upper, contiguous: true }),
                    Err(Error::EmptyStartState(_)) | Err(Error::ZeroWeights) => None,
                    Err(e) => return Err(e),
                };
            }
        }
        _ => {
            let kind = method.score_kind().expect("conformal score method");
            let prepared = PreparedConformal::new(kind, &ctx.calibration, Some(&data.quantiles), config.alpha)?;
            for x in (0..needed.len()).filter(|&x| needed[x]) {
                out[x] = from_set(prepared.interval(x, grid, |y| ctx.table.value_or_fallback(x, y)));
            }
        }
    }
    Ok(out)
}

/// Scores one method on the shared test points of a `(seed, ε)` context.
pub fn evaluate_method(
    method: Method,
    config: &ExperimentConfig,
    setup: &Setup,
    data: &SeedData,
    ctx: &EpsilonContext,
) -> Result<CellResult> {
    let mut needed = vec![false; setup.model.num_states()];
    ctx.tests.iter().for_each(|&(x, _)| needed[x] = true);
    let extents = state_extents(method, config, setup, data, ctx, &needed)?;
    let mut covered = 0usize;
    let mut noncontiguous = 0usize;
    let (mut sum_lo, mut sum_hi, mut sum_len, mut nonempty) = (0.0, 0.0, 0.0, 0usize);
    for &(x, y) in &ctx.tests {
        if let Some(e) = extents[x] {
            covered += e.contains(y) as usize;
            noncontiguous += (!e.contiguous) as usize;
            sum_lo += e.lower;
            sum_hi += e.upper;
            sum_len += e.upper - e.lower;
            nonempty += 1;
        }
    }
    let mean = |s: f64| if nonempty == 0 { f64::NAN } else { s / nonempty as f64 };
    Ok(CellResult {
        method,
        epsilon: ctx.epsilon,
        seed: ctx.seed,
        horizon: config.horizon,
        instance: config.instance.clone(),
        coverage: covered as f64 / ctx.tests.len() as f64,
        mean_lower: mean(sum_lo),
        mean_upper: mean(sum_hi),
        mean_length: mean(sum_len),
        miss_count: if method == Method::StandardCp { 0 } else { ctx.miss_count },
        noncontiguous_count: noncontiguous,
    })
}

pub fn sort_results(results: &mut [CellResult]) {
    results.sort_by(|a, b| {
        a.method.name().cmp(b.method.name()).then(a.epsilon.total_cmp(&b.epsilon)).then(a.seed.cmp(&b.seed))
    });
}

/// Runs the full grid; results come back sorted by `(method, ε, seed)`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let setup = Setup::new(config)?;
    let mut exact_cache: BTreeMap<String, WeightTable> = BTreeMap::new();
    let mut results = Vec::new();
    for seed in 0..config.num_seeds {
        let data = SeedData::generate(config, &setup, seed)?;
        for &eps in &config.epsilon_grid {
            let target = setup.target(eps)?;
            let table = if config.weight_estimator == WeightEstimator::ExactOracle {
                match exact_cache.get(&eps_id(eps)) {
                    Some(t) => t.clone(),
                    None => {
                        let t = build_weight_table(config, &setup, &data, &target, seed, eps)?;
                        exact_cache.insert(eps_id(eps), t.clone());
                        t
                    }
                }
            } else {
                build_weight_table(config, &setup, &data, &target, seed, eps)?
            };
            let ctx = EpsilonContext::new(config, &setup, &data, seed, eps, table)?;
            for &method in &config.methods {
                results.push(evaluate_method(method, config, &setup, &data, &ctx)?);
            }
        }
    }
    sort_results(&mut results);
    Ok(results)
}

/// Runs a single `(method, ε, seed)` cell from scratch.
pub fn run_cell(config: &ExperimentConfig, method: Method, eps: f64, seed: usize) -> Result<CellResult> {
    let setup = Setup::new(config)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Config(format!("cell epsilon must lie in [0,1], got {eps}")));
    }
    let data = SeedData::generate(config, &setup, seed)?;
    let target = setup.target(eps)?;
    let table = build_weight_table(config, &setup, &data, &target, seed, eps)?;
    let ctx = EpsilonContext::new(config, &setup, &data, seed, eps, table)?;
    evaluate_method(method, config, &setup, &data, &ctx)
}

/// Parses a `method:eps:seed` cell selector.
pub fn parse_cell(spec: &str) -> Result<(Method, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [m, e, s] = parts.as_slice() else {
        return Err(Error::Config(format!("cell must look like method:eps:seed, got `{spec}`")));
    };
    let eps = e.parse::<f64>().map_err(|_| Error::Config(format!("bad cell epsilon `{e}`")))?;
    let seed = s.parse::<usize>().map_err(|_| Error::Config(format!("bad cell seed `{s}`")))?;
    Ok((m.parse()?, eps, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTarget {
    pub epsilon: f64,
    pub returns: Vec<ReturnDistribution>,
    pub weights: Vec<BTreeMap<i64, f64>>,
}

/// Exact return laws of the behavior and every target policy, plus exact weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub instance: String,
    pub horizon: usize,
    pub epsilon_b: f64,
    pub behavior: Vec<ReturnDistribution>,
    pub targets: Vec<OracleTarget>,
}

pub fn oracle_report(config: &ExperimentConfig) -> Result<OracleReport> {
    let setup = Setup::new(config)?;
    let ns = setup.model.num_states();
    let dists = |p: &Policy| {
        (0..ns).map(|x| exact_return_distribution_capped(&setup.model, p, x, config.grid_cap)).collect::<Result<Vec<_>>>()
    };
    let behavior = dists(&setup.behavior)?;
    let mut targets = Vec::new();
    for &eps in &config.epsilon_grid {
        let target = setup.target(eps)?;
        crate::mdp::check_absolute_continuity(&target, &setup.behavior)?;
        let returns = dists(&target)?;
        let weights =
            (0..ns).map(|x| crate::mdp::ratio_on_support(&returns[x], &behavior[x], x)).collect::<Result<Vec<_>>>()?;
        targets.push(OracleTarget { epsilon: eps, returns, weights });
    }
    Ok(OracleReport {
        instance: config.instance.clone(),
        horizon: config.horizon,
        epsilon_b: config.epsilon_b,
        behavior,
        targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::inventory(InventoryParams::instance1(0).with_capacity(3), "small", 3);
        c.num_train = 300;
        c.num_cal = 300;
        c.num_test = 50;
        c.num_seeds = 2;
        c.epsilon_grid = vec![0.2, 0.4];
        c.bootstrap.num_resamples = 20;
        c
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let c = ExperimentConfig::from_json(r#"{"environment":{"inventory":{"capacity":10,"fixed_order_cost":1,"unit_cost":2,"holding_cost":2,"unit_price":4,"demand_rate":10.0}},"horizon":20}"#).unwrap();
        assert_eq!((c.num_train, c.num_cal, c.num_test, c.num_seeds), (20_000, 20_000, 500, 5));
        assert_eq!(c.weight_estimator, WeightEstimator::Empirical);
        assert!(c.validate().is_ok());
        assert!(ExperimentConfig::from_json(r#"{"environment":{"model_file":"m.json"},"horizon":2,"bogus":1}"#).is_err());
        let p = c.clone().with_paper_scale();
        assert_eq!((p.num_seeds, p.num_test), (30, 2000));
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.num_test = 0;
        assert!(c.validate().unwrap_err().to_string().contains("num_test ≥ 1"));
        let mut c = small();
        c.epsilon_grid = vec![1.5];
        assert!(c.validate().is_err());
        let mut c = small();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn cell_selector() {
        assert_eq!(parse_cell("pinball:0.4:3").unwrap(), (Method::Pinball, 0.4, 3));
        assert!(parse_cell("pinball:0.4").is_err());
        assert!(parse_cell("nope:0.4:1").is_err());
    }

    #[test]
    fn grid_shape_and_order() {
        let c = small();
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.len(), 2 * 2 * 5);
        let mut sorted = r.clone();
        sort_results(&mut sorted);
        assert_eq!(sorted, r);
        assert!(r.iter().all(|c| (0.0..=1.0).contains(&c.coverage) && c.mean_lower <= c.mean_upper));
    }

    #[test]
    fn single_cell_matches_grid() {
        let c = small();
        let all = run_experiment(&c).unwrap();
        for cell in all.iter().filter(|r| r.seed == 1 && r.epsilon == 0.2) {
            assert_eq!(&run_cell(&c, cell.method, 0.2, 1).unwrap(), cell);
        }
    }

    #[test]
    fn oracle_report_weights_average_to_one() {
        let c = small();
        let rep = oracle_report(&c).unwrap();
        for t in &rep.targets {
            for (x, w) in t.weights.iter().enumerate() {
                let m: f64 = rep.behavior[x].support.iter().zip(&rep.behavior[x].pmf).map(|(y, p)| p * w[y]).sum();
                assert!((m - 1.0).abs() < 1e-9);
            }
        }
    }
}
