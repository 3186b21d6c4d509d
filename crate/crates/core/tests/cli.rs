use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn swcons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swcons")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn oracle_config() -> Value {
    serde_json::from_str(&std::fs::read_to_string(configs().join("two_agent_oracle.json")).unwrap()).unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn simulate_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("two_agent_oracle.json");
    let o = swcons(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out.join("trajectory.csv"));
    assert_eq!(rows[0], ["t", "alpha", "d"]);
    assert_eq!(rows.len(), 3002);
    for r in &rows[1..] {
        let t: f64 = r[0].parse().unwrap();
        let d: f64 = r[2].parse().unwrap();
        // signed area of α over [0, t] for the schedule 0 < 1 < 1.5
        let area = if t <= 1.0 { t } else if t <= 1.5 { 2.0 - t } else { t - 1.0 };
        assert!((d - (-2.0 * area).exp()).abs() <= 1e-7, "t = {t}");
    }
    assert!(out.join("summary.json").exists());
}

#[test]
fn bad_cap_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = configs().join("bad_cap_violation.json");
    let o = swcons(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ln2/K"));
    assert!(!out.join("trajectory.csv").exists());

    let o = swcons(&["validate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_config_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = oracle_config();
    v["N"] = 1.into();
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = swcons(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nope.json");
    let o = swcons(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_horizon_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = oracle_config();
    v["horizon"] = 0.0.into();
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("run");
    let o = swcons(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out.join("trajectory.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0");
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("hk_geometric.json");
    let out = dir.path().join("ok");
    let o = swcons(&["certify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["all_ok"], true);

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["fault_injection"] = json!({"sample": 1234, "agent": 1, "delta": 0.5});
    let faulty = write_config(dir.path(), "faulty.json", &v);
    let out = dir.path().join("faulty");
    let o = swcons(&["certify", "--config", &faulty, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["max_principle"]["violations"].as_array().unwrap().len(), 1);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("hk_geometric.json");
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = swcons(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "17"]);
        assert_eq!(o.status.code(), Some(0));
        files.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn sweep_bad_length_degrades_final_diameter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_template.json");
    let out = dir.path().join("sweep");
    let o = swcons(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--axis", "schedule.bad0", "--values", "0.1,0.3,0.5,0.69",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out.join("sweep.csv"));
    assert_eq!(rows[0], ["value", "d_final", "dV_final", "all_ok", "cycle_factor", "status"]);
    assert_eq!(rows.len(), 5);
    let d: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(d.windows(2).all(|w| w[0] < w[1]), "{d:?}");
    assert!(rows[1..].iter().all(|r| r[3] == "true"));
    for k in 0..4 {
        assert!(out.join(format!("run_{k:03}")).join("trajectory.csv").exists());
    }
}

#[test]
fn sweep_good_length_reports_cycle_factor() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("sweep_template.json")).unwrap()).unwrap();
    v["schedule"] = json!({"family": "constant-lengths", "good_len": 1.0, "bad_len": 0.1});
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("sweep");
    let o = swcons(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--axis", "schedule.good_len", "--values", "0.5,1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&out.join("sweep.csv"));
    let k = 1.0_f64;
    let g = (k * 0.1).exp() / (2.0 - (k * 0.1).exp());
    for (r, len) in rows[1..].iter().zip([0.5, 1.0, 2.0]) {
        let e = (-k * len).exp();
        let expected = g * (1.0 - e).max(e);
        let got: f64 = r[4].parse().unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sweep_template.json");
    let out = dir.path().join("sweep");
    let o = swcons(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--axis", "schedule.bad0", "--values", ""]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_rows(&out.join("sweep.csv")).len(), 1);
}

#[test]
fn validate_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("hk_geometric.json");
    let o = swcons(&["validate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ok"], true);
    assert!(dir.path().join("validation.json").exists());
}
