use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = "n_phi = 16\nn_s = 16\nsamples_per_cell = 50\nseed = 3\n\n[sigma]\ngk_samples = 20000\ngk_lags = 20\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_resonances"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn report(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn validate_reports_positive_tau_min() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["validate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = report(dir.path(), "validate.json");
    assert!(v["tau_min"].as_f64().unwrap() > 0.0);
    assert!(v["tau_max"].as_f64().unwrap() >= v["tau_min"].as_f64().unwrap());
    assert_eq!(v["command"], "validate");
}

#[test]
fn trivial_cover_has_leading_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), SMALL, &["cover", "--lattice", "1,0,0,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/resonances.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let first: Vec<f64> = rows[0].split(',').map(|x| x.parse().unwrap()).collect();
    assert!((first[3] - 1.0).abs() < 1e-10 && first[4].abs() < 1e-10, "{}", rows[0]);
    assert_eq!(report(dir.path(), "report.json")["group_size"], 1);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "n_phi = 16\nno_such_key = 1\n", &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), "n_phi = 0\n", &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), "[table]\ndiscs = [{ center = [0.0, 0.0], radius = 0.6 }]\n", &["validate"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = format!("{SMALL}\n[curve]\npoints = 6\nradius = 1.0\n");
    for d in [&a, &b] {
        let out = run(d.path(), &config, &["curve"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("out/curve.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let strip = |d: &tempfile::TempDir| {
        let mut v = report(d.path(), "curve.json");
        v.as_object_mut().unwrap().remove("runtime_seconds");
        v.as_object_mut().unwrap().remove("config");
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn check_runs_a_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_resonances"))
        .arg("--out")
        .arg(dir.path())
        .args(["check", "--only", "1"])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS criterion  1"), "{text}");
    assert!(out.status.success(), "{text}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("acceptance.json").exists());
}
