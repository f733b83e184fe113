use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conformal-ope")).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        r#"{{
  "environment": {{"inventory": {{"capacity": 3, "fixed_order_cost": 1, "unit_cost": 2,
    "holding_cost": 2, "unit_price": 4, "demand_rate": 10.0}}}},
  "instance": "tiny",
  "horizon": 3,
  "epsilon_grid": [0.2, 0.4],
  "num_train": 300,
  "num_cal": 300,
  "num_test": 40,
  "num_seeds": 2,
  "bootstrap": {{"num_resamples": 30, "ci_level": 0.95}}{extra}
}}"#
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "");
    assert_eq!(bin(&["validate", "--config", &good]).status.code(), Some(0));
    let bad = write_config(dir.path(), r#", "surprise": true"#);
    let out = bin(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));
    assert_eq!(bin(&["validate", "--config", "/nonexistent/config.json"]).status.code(), Some(1));
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = bin(&["run", "--config", &config, "--out-dir", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = std::fs::read(out_a.join("results.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(out_b.join("results.csv")).unwrap());
    assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 5 * 2 * 2);
    assert!(out_a.join("coverage_tiny_h3.svg").exists());
    assert!(out_a.join("intervals_tiny_h3.svg").exists());
    assert!(out_a.join("summary.md").exists());
}

#[test]
fn single_cell_matches_grid_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let o = bin(&["run", "--config", &config, "--cell", "double_quantile:0.2:1"]);
    assert_eq!(o.status.code(), Some(0));
    let cell: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let out = dir.path().join("grid");
    bin(&["run", "--config", &config, "--out-dir", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("double_quantile,0.200000,1,")).unwrap();
    let coverage: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((cell["coverage"].as_f64().unwrap() - coverage).abs() < 5e-7);
    assert_eq!(bin(&["run", "--config", &config, "--cell", "bogus"]).status.code(), Some(1));
}

#[test]
fn oracle_prints_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let o = bin(&["oracle", "--config", &config]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["behavior"].as_array().unwrap().len(), 4);
    assert_eq!(v["targets"].as_array().unwrap().len(), 2);
}

#[test]
fn runtime_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#", "weight_estimator": "exact_oracle", "grid_cap": 5"#);
    let o = bin(&["run", "--config", &config, "--out-dir", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
