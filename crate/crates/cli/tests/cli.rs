use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netblock::experiment::{BSpec, ExperimentConfig, RhoSpec, Scenario, SizeSpec};
use netblock::io;
use serde_json::Value;

fn netblock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netblock"))
        .args(args)
        .env("NETBLOCK_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every layer equals `Z B Z^T`: rho = 1 and a 0/1 rank-2 `B` with K = 3.
fn noiseless_config() -> ExperimentConfig {
    let mut cfg = netblock::experiment::presets::rank1(false);
    cfg.scenario = Scenario::MonoTrueZ;
    cfg.n = 30;
    cfg.k = 3;
    cfg.d = 2;
    cfg.layers = 6;
    cfg.rho = RhoSpec::Value(1.0);
    cfg.replicates = 1;
    cfg.b = BSpec::Explicit {
        matrix: vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
    };
    cfg.sizes = SizeSpec::Equal;
    cfg.self_loops = true;
    cfg
}

fn small_bench_config() -> ExperimentConfig {
    let mut cfg = netblock::experiment::presets::rank1(false);
    cfg.n = 60;
    cfg.k = 2;
    cfg.d = 1;
    cfg.layers = 4;
    cfg.rho = RhoSpec::Value(0.5);
    cfg.replicates = 2;
    cfg.b = BSpec::Rank1Geometric { p: 0.9 };
    cfg.sizes = SizeSpec::Equal;
    cfg
}

fn simulate(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let cfg_path = dir.join("in.json");
    io::write_json(&cfg_path, cfg).unwrap();
    let out = dir.join("sample");
    let r = netblock(&["simulate", "--config", s(&cfg_path), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_flag_exits_one_and_help_exits_zero() {
    assert_eq!(code(&netblock(&["estimate", "--bogus"])), 1);
    assert_eq!(code(&netblock(&["frobnicate"])), 1);
    assert_eq!(code(&netblock(&["--help"])), 0);
}

#[test]
fn missing_manifest_exits_two() {
    let r = netblock(&["estimate", "--manifest", "/nonexistent/manifest.json", "--k", "2"]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("/nonexistent/manifest.json"));
}

#[test]
fn unknown_preset_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let r = netblock(&["simulate", "--preset", "nope", "--out", s(dir.path())]);
    assert_eq!(code(&r), 1);
}

#[test]
fn noiseless_estimate_recovers_rank_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let sample = simulate(dir.path(), &noiseless_config());
    for f in ["manifest.json", "labels.txt", "b_true.csv", "config.json", "layer_000.txt"] {
        assert!(sample.join(f).exists(), "{f} missing");
    }
    let out = dir.path().join("est");
    let r = netblock(&[
        "estimate",
        "--manifest",
        s(&sample.join("manifest.json")),
        "--k",
        "3",
        "--labels",
        s(&sample.join("labels.txt")),
        "--cv",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report = read(&out.join("report.json"));
    assert_eq!(report["d_hat"], 2);
    assert_eq!(report["averaging"]["d_hat"], 2);
    let b_hat = io::read_matrix_csv(&out.join("b_hat.csv")).unwrap();
    let truth = io::read_matrix_csv(&sample.join("b_true.csv")).unwrap();
    assert!((b_hat - truth).norm() < 1e-3);
}

#[test]
fn estimate_rejects_lambda_with_cv() {
    let r = netblock(&["estimate", "--manifest", "m.json", "--k", "2", "--lambda", "1", "--cv"]);
    assert_eq!(code(&r), 1);
}

#[test]
fn bench_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bench.json");
    io::write_json(&cfg_path, &small_bench_config()).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("report_{threads}.json"));
        let r = Command::new(env!("CARGO_BIN_EXE_netblock"))
            .args(["bench", "--config", s(&cfg_path), "--out", s(&out)])
            .env("NETBLOCK_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let report: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_sweep_reports_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_bench_config();
    cfg.layers = 1;
    let cfg_path = dir.path().join("sweep.json");
    io::write_json(&cfg_path, &cfg).unwrap();
    let r = netblock(&["bench", "--config", s(&cfg_path), "--sweep", "1,2,60"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let curve: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(curve["r_values"], serde_json::json!([1, 2, 60]));
    assert_eq!(curve["mean_relative_error"].as_array().unwrap().len(), 3);
}

#[test]
fn scree_on_noiseless_sample() {
    let dir = tempfile::tempdir().unwrap();
    let sample = simulate(dir.path(), &noiseless_config());
    let manifest = sample.join("manifest.json");
    let labels = sample.join("labels.txt");
    let r = netblock(&[
        "scree",
        "--manifest",
        s(&manifest),
        "--k",
        "3",
        "--labels",
        s(&labels),
        "--source",
        "averaging",
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(report["source"], "averaging");
    let sv = report["scree"]["singular_values"].as_array().unwrap();
    assert_eq!(sv.len(), 3);
    // rank-2 B: the third singular value vanishes and the elbow is at 2
    assert!(sv[2].as_f64().unwrap() < 1e-10);
    assert_eq!(report["scree"]["l_tilde"], 2);
}
