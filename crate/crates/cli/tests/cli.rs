use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(args)
        .output()
        .expect("bench runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SMALL: &str = r#"{
  "name": "cli_small",
  "system": { "scalar": { "a": 0.9, "b": 1.0, "gamma": 0.1 } },
  "signal": { "source": { "kind": "sinusoidal", "amplitude": 1.0, "omega_min": 0.05, "omega_max": 0.5 }, "seed": 0, "w_clip": 1.0 },
  "cost": { "kind": "quadratic" },
  "controllers": [ { "kind": "osc", "h": 4 }, { "kind": "gpc" }, { "kind": "zero" } ],
  "T": 120,
  "seeds": [0, 1]
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn schedule_prints_unit_constant_values() {
    let out = bench(&["schedule", "--T", "10000", "--gamma", "0.1", "--d", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["m"], 136);
    assert_eq!(v["h_uncapped"], 870);
    assert_eq!(v["h"], 136);
    assert_eq!(v["C1"], 1.0);
}

#[test]
fn verify_passes() {
    let out = bench(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 30);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn filters_writes_bank_and_checks_tail() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bank.json");
    let out = bench(&[
        "filters", "--m", "32", "--gamma", "0.1", "--h", "5", "--out", file.to_str().unwrap(), "--verify", "1000",
    ]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["sigmas"].as_array().unwrap().len(), 5);
    assert_eq!(v["tail_bound"]["pass"], true);
    let bank: serde_json::Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(bank["phis"].as_array().unwrap().len(), 5);
}

#[test]
fn convbench_reports_percentiles() {
    for mode in ["direct", "fast"] {
        let out = bench(&["convbench", "--T", "512", "--m", "64", "--h", "4", "--mode", mode]);
        assert!(out.status.success());
        let v = json(&out);
        assert_eq!(v["mode"], mode);
        assert!(v["ns"]["p50"].as_u64().unwrap() <= v["ns"]["max"].as_u64().unwrap());
        assert!(v["ops"].as_u64().unwrap() > 0);
    }
}

#[test]
fn gamma_demo_exit_codes() {
    let out = bench(&["gamma-demo", "--T", "1000000", "--k", "0.0416666667"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["sandwich_holds"], true);
    assert_eq!(bench(&["gamma-demo", "--T", "1000", "--k", "0.5"]).status.code(), Some(2));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = bench(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--parallel", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["runs"].as_array().unwrap().len(), 6);
    for name in ["report.json", "config.json", "osc_seed0.csv", "gpc_seed1.summary.json", "regret_zero_seed1.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let again = dir.path().join("again");
    let out = bench(&["run", "--config", &cfg, "--out", again.to_str().unwrap(), "--parallel", "1"]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(out_dir.join("osc_seed1.csv")).unwrap(),
        fs::read(again.join("osc_seed1.csv")).unwrap()
    );
}

#[test]
fn run_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = SMALL.replacen("\"T\": 120", "\"T\": 120, \"extra\": true", 1);
    let out = bench(&["run", "--config", &write_config(dir.path(), &unknown)]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(bench(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_reports_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "system": { "inline": { "A": [2.0, 0.0, 0.0, 0.5], "B": [0.0, 1.0], "d": 2, "n": 1,
                              "kappa": 1.0, "kappa_B": 1.0, "W": 1.0, "gamma": 0.1 } },
      "signal": { "source": { "kind": "zero" }, "seed": 0, "w_clip": 1.0 },
      "cost": { "kind": "quadratic" },
      "controllers": [ { "kind": "osc", "h": 2, "stabilize": 0.5 } ],
      "T": 20,
      "seeds": [0]
    }"#;
    let out = bench(&["run", "--config", &write_config(dir.path(), cfg), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
