use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use trunc_noise::noise::{truncated_gaussian_pmf, GridSpec, NoisePmf};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trunc-noise"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_config(output_dir: &Path, factor: f64) -> Value {
    json!({
        "train": {
            "grid": { "half_width": 2.0, "half_points": 20, "bias": 1e-5 },
            "scenario": { "kind": "sensitivity", "s": 0.5 },
            "accountant": "adp",
            "utility_order": 1,
            "eps": 0.5,
            "compositions": 2,
            "epochs": 60,
            "learning_rate": 0.01,
            "lr_decay": 0.999,
            "buckets": { "half_count": 100, "factor": factor },
            "sigmoids": 8,
            "slope": 20.0,
            "seed": 5,
            "reference_half_count": 500
        },
        "output_dir": output_dir,
        "report": { "eps_list": [0.0, 0.5, 1.0] }
    })
}

fn write_json(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn gaussian_file(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("gauss.json");
    let grid = GridSpec::new(2.0, 8, 1e-5).unwrap();
    truncated_gaussian_pmf(&grid, 1.0).unwrap().save(&path).unwrap();
    path
}

#[test]
fn optimize_writes_three_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let mut noises = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        let cfg_path = dir.path().join(format!("{tag}.json"));
        write_json(&cfg_path, &small_config(&out_dir, 1.005));
        let out = run(&["optimize", cfg_path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["noise.json", "metrics.csv", "curve.csv"] {
            assert!(out_dir.join(f).is_file(), "{f} missing");
        }
        let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().next().unwrap(), "epoch,total,lx,utility,w_t,lr");
        assert_eq!(metrics.lines().count(), 61);
        noises.push(std::fs::read(out_dir.join("noise.json")).unwrap());
    }
    assert_eq!(noises[0], noises[1]);
    let noise = NoisePmf::from_json(std::str::from_utf8(&noises[0]).unwrap()).unwrap();
    assert_eq!(noise.meta["seed"], "5");
}

#[test]
fn optimize_rejects_a_coarse_factor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    write_json(&cfg_path, &small_config(&dir.path().join("out"), 1.5));
    let out = run(&["optimize", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.01"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn optimize_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let mut cfg = small_config(&dir.path().join("out"), 1.005);
    cfg["train"]["learning_rat"] = json!(0.1);
    write_json(&cfg_path, &cfg);
    let out = run(&["optimize", cfg_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn malformed_noise_file_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"grid": {"half_width": 1.0, "half_points": 2, "bias": 0.0}, "pmf": [0.5, 0.5]}"#).unwrap();
    let out = run(&["evaluate", "--noise", path.to_str().unwrap(), "--scenario", "sensitivity:0.5"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("pmf"));
}

#[test]
fn evaluate_emits_a_curve_with_oracle_columns() {
    let dir = tempfile::tempdir().unwrap();
    let noise = gaussian_file(dir.path());
    let csv = dir.path().join("curve.csv");
    let out = run(&[
        "evaluate",
        "--noise",
        noise.to_str().unwrap(),
        "--scenario",
        "sensitivity:0.5",
        "--n",
        "1,2",
        "--eps",
        "0,0.3",
        "--half-count",
        "2000",
        "--oracle",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "accountant,n,eps,delta_ab,delta_ba,delta,exact_ab,exact_ba,exact"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3 * 2 * 2);
    for r in rows {
        assert!(r[4] >= r[7] - 1e-12, "bound {} below exact {}", r[4], r[7]);
    }
}

#[test]
fn verify_reports_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let good = gaussian_file(dir.path());
    let out = run(&["verify", "--noise", good.to_str().unwrap(), "--scenario", "sensitivity:0.5", "--eps", "0.3"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passes"], json!(true));

    let bad = dir.path().join("towers.json");
    let grid = GridSpec::new(1.0, 2, 0.0).unwrap();
    NoisePmf::new(grid, vec![0.4, 0.1, 0.1, 0.4]).unwrap().save(&bad).unwrap();
    let out = run(&["verify", "--noise", bad.to_str().unwrap(), "--scenario", "sensitivity:0.5", "--eps", "0.3"]);
    assert_eq!(code(&out), 5);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["structure"]["passes"], json!(false));
    assert_eq!(report["shift_invariance"]["applicable"], json!(false));
}

#[test]
fn compare_recovers_a_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let noise = gaussian_file(dir.path());
    let out = run(&[
        "compare",
        "--noise",
        noise.to_str().unwrap(),
        "--baseline",
        "gaussian",
        "--scenario",
        "sensitivity:0.5",
        "--eps",
        "0.3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["parameter"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(report["kl"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn sample_is_seeded_and_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let noise = gaussian_file(dir.path());
    let args = |seed: &str, dim: &str| {
        run(&["sample", "--noise", noise.to_str().unwrap(), "--count", "50", "--dim", dim, "--seed", seed])
    };
    let a = args("4", "1");
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, args("4", "1").stdout);
    assert_ne!(a.stdout, args("5", "1").stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 50);
    for l in text.lines() {
        let x: f64 = l.parse().unwrap();
        assert!(x.abs() <= 2.0 + 1e-5);
    }
    let v = String::from_utf8(args("4", "3").stdout).unwrap();
    assert!(v.lines().all(|l| l.split(',').count() == 3));
}

#[test]
fn bad_scenario_is_a_usage_error() {
    let out = run(&["verify", "--noise", "x.json", "--scenario", "laplace:1", "--eps", "0.3"]);
    assert_eq!(code(&out), 2);
}
