use std::path::Path;
use std::process::{Command, Output};

fn clusterflt(args: &[&str], dir: &Path, envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_clusterflt"));
    cmd.args(args).current_dir(dir).env_remove("CLUSTERFLT_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const TINY_IID: &str = r#"
experiment_id = "tiny"
model = "iid"
alpha = 0.8
n = 10
replicates = 100
centering_draws = 10000
tail_reps = 1000
formats = ["json", "csv", "svg"]
"#;

const SMALL_MA: &str = r#"
experiment_id = "ma"
model = "ma"
alpha = 0.5
coefficients = [0.25, 0.25]
n = 500
replicates = 200
centering_draws = 100000
tail_reps = 5000
formats = ["json"]
"#;

#[test]
fn verify_flt_tiny_is_underpowered_but_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_IID);
    let out = clusterflt(&["--config", &cfg, "--out", "res", "verify-flt"], dir.path(), &[]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 2, "{}", String::from_utf8_lossy(&out.stderr));
    let json = std::fs::read_to_string(dir.path().join("res/tiny-seed1.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["underpowered"], true);
    assert_eq!(v["ks"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("res/tiny-seed1-samples.csv").exists());
    for t in ["0.25", "0.5", "1"] {
        assert!(dir.path().join(format!("res/tiny-seed1-t{t}.svg")).exists());
    }
    assert!(String::from_utf8_lossy(&out.stderr).contains("runtime"));
    assert!(!json.contains("runtime"));
}

#[test]
fn verify_flt_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MA);
    let mut reports = Vec::new();
    for w in ["1", "8"] {
        let out = clusterflt(&["--config", &cfg, "--workers", w, "verify-flt"], dir.path(), &[]);
        assert_ne!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(dir.path().join("out/ma-seed1.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn environment_seed_is_honored_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY_IID);
    let out = clusterflt(&["--config", &cfg, "verify-flt"], dir.path(), &[("CLUSTERFLT_SEED", "42")]);
    assert_ne!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/tiny-seed42.json")).unwrap()).unwrap();
    assert_eq!(v["seed_from_env"], 42);
    assert_eq!(v["config"]["seed"], 42);
    // The flag wins over the environment.
    clusterflt(&["--config", &cfg, "--seed", "7", "verify-flt"], dir.path(), &[("CLUSTERFLT_SEED", "42")]);
    assert!(dir.path().join("out/tiny-seed7.json").exists());
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = \"iid\"\nalpha = 0.8\nbogus_key = 1\n");
    assert_eq!(clusterflt(&["--config", &cfg, "verify-flt"], dir.path(), &[]).status.code(), Some(1));
    let cfg = write_config(dir.path(), "model = \"garch11sq\"\nalpha0 = 0.1\nalpha1 = 1.0\nbeta1 = 0.0\n");
    let out = clusterflt(&["--config", &cfg, "verify-flt"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing triple"));
    assert_eq!(clusterflt(&["verify-flt", "--config", "nope.toml"], dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn metric_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = clusterflt(&["metric", "--pairs", "100", "--oracle-cases", "5"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/metric-seed1.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], true);
}

#[test]
fn triple_for_moving_average() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MA);
    let out = clusterflt(&["--config", &cfg, "triple"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let first = String::from_utf8_lossy(&out.stdout).lines().next().unwrap().to_string();
    let t: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert!((t["c_plus"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    assert!((t["b"].as_f64().unwrap() - (0.5f64.sqrt() - 1.0)).abs() < 1e-12);
}

#[test]
fn simulate_writes_batches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_MA);
    let out = clusterflt(&["--config", &cfg, "simulate"], dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let limit = std::fs::read_to_string(dir.path().join("out/ma-seed1-limit.csv")).unwrap();
    assert!(limit.starts_with("replicate,value\n"));
    assert_eq!(limit.lines().count(), 201);
    let sums = std::fs::read_to_string(dir.path().join("out/ma-seed1-partial-sums.csv")).unwrap();
    assert_eq!(sums.lines().count(), 201);
    let series = std::fs::read_to_string(dir.path().join("out/ma-seed1-series.csv")).unwrap();
    assert_eq!(series.lines().count(), 501);
}

#[test]
fn studies_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment_id = \"s\"\nmodel = \"ma\"\nalpha = 1.0\ncoefficients = [0.5, 0.5]\nn = 5000\nreplicates = 20\ntail_reps = 5000\n",
    );
    for cmd in ["theta", "tailproc", "diagnose"] {
        let out = clusterflt(&["--config", &cfg, cmd], dir.path(), &[]);
        assert_ne!(out.status.code(), Some(1), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["s-seed1-theta.json", "s-seed1-theta.svg", "s-seed1-tailproc.json", "s-seed1-diagnose.json"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
}
