use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abc")).args(args).output().expect("abc runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CONFIG: &str = r#"{"model": {"kind": "gaussian"}, "theta0": [1, 1], "T": 50, "summary": "mean_var",
    "prior": {"kind": "box", "bounds": [[0.5, 1.5], [0.5, 1.5]]},
    "schedule": [{"type": "power-quantile", "params": {"p": 1.0}}, {"type": "power-quantile", "params": {"p": 1.5}}],
    "retain_k": 40, "R": 3, "seed": 5, "path": "sufficient"}"#;

fn write_config(dir: &Path) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, CONFIG).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_then_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("run");
    let o = abc(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("reps/rep_000002.csv").exists());
    assert!(stdout(&o).contains("alpha=T^-1.5"));

    let manifest = out.join("manifest.json");
    let o = abc(&["replay", manifest.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("reproduced byte-identically"));
    assert!(out.join("replay/summary.csv").exists());
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let mut summaries = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = abc(&["--threads", threads, "run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        let mut files = Vec::new();
        for name in ["summary.csv", "reps/rep_000000.csv", "reps/rep_000001.csv", "reps/rep_000002.csv"] {
            files.push(fs::read(out.join(name)).unwrap());
        }
        summaries.push(files);
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn diag_accepts_known_studies_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("d");
    let o = abc(&["diag", "coverage", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("coverage.csv")).unwrap().starts_with("T,"));

    let o = abc(&["diag", "speed", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown study"));
}

#[test]
fn unknown_experiment_lists_registry() {
    let o = abc(&["experiment", "fig99"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["fig1-table1-rmse", "table-s2-coverage", "bias-theorem3", "gap-theorem4"] {
        assert!(err.contains(name), "{err}");
    }
    let o = abc(&["experiment", "list"]);
    assert_eq!(stdout(&o).lines().count(), 8);
}

#[test]
fn experiment_runs_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gap");
    let o = abc(&["experiment", "gap-theorem4", "--R", "50", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("gap_instances.csv")).unwrap().lines().count(), 51);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
}

#[test]
fn oracle_rates_reports_exponent() {
    let o = abc(&["oracle", "rates", "--kappa", "2", "--D", "2", "--h", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\"exponent\": 0.5"), "{text}");
    let o = abc(&["oracle", "rates", "--kappa", "2", "--tau", "1", "--D", "2", "--h", "0.5"]);
    assert!(!o.status.success());
}

#[test]
fn oracle_exact_gaussian_writes_normalized_grids() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("y.csv");
    let values: Vec<String> = (0..60).map(|i| format!("{}", 1.0 + ((i * 37) % 17) as f64 / 17.0 - 0.5)).collect();
    fs::write(&data, format!("y\n{}\n", values.join("\n"))).unwrap();
    let out = dir.path().join("post.csv");
    let o = abc(&["oracle", "exact-gaussian", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<(String, f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 1024);
    for param in ["mu", "sigma"] {
        let pts: Vec<_> = rows.iter().filter(|r| r.0 == param).collect();
        let area: f64 = pts.windows(2).map(|w| 0.5 * (w[0].2 + w[1].2) * (w[1].1 - w[0].1)).sum();
        assert!((area - 1.0).abs() < 1e-9, "{param}: {area}");
    }
}
