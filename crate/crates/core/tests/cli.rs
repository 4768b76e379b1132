use std::path::{Path, PathBuf};
use std::process::Command;

use armpc::cli::{self, Summary};
use armpc::config::Config;
use armpc::controller::Variant;
use armpc::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_armpc"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn small_matched() -> Config {
    let mut cfg = Config::load(&bundled("double_integrator_matched")).unwrap();
    cfg.experiment.seeds = 3;
    cfg.experiment.steps = 20;
    cfg
}

#[test]
fn every_bundled_config_validates() {
    for name in ["double_integrator_matched", "double_integrator_unmatched", "quadrotor", "cruise", "toy"] {
        Config::load(&bundled(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn bundled_matched_config_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let summary = cli::run(&small_matched(), dir.path(), Some(1)).unwrap();
    let Summary::Control(rows) = summary else { panic!("expected controller rows") };
    let ce = rows.iter().find(|r| r.controller == "adaptive_a").unwrap();
    assert_eq!(ce.state_violations + ce.input_violations + ce.invariant_failures, 0);
    assert_eq!(ce.feasible_runs, ce.runs);
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.starts_with(&format!("# {}\n", cli::SUMMARY_SCHEMA)));
    assert!(dir.path().join("config.json").exists());
    assert_eq!(std::fs::read_dir(dir.path().join("runs")).unwrap().count(), 2 * 2 * 3);
}

#[test]
fn non_positive_definite_r_names_the_field() {
    let err = Config::from_json_str(r#"{"controller": {"r": [[0.0]]}}"#).unwrap_err();
    match err {
        Error::Config { path, msg } => {
            assert_eq!(path, "controller.r");
            assert!(msg.contains("positive definite"), "{msg}");
        }
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn schema_errors_carry_field_paths() {
    let cases = [
        (r#"{"plant": {"kind": "double_integrator", "noise": {"kind": "uniform_box", "half_width": -1}}}"#, "plant.noise.half_width"),
        (r#"{"experiment": {"steps": -3}}"#, "experiment.steps"),
        (r#"{"controller": {"variants": ["nope"]}}"#, "controller.variants[0]"),
        (r#"{"controller": {"q": [1.0, 2.0, 3.0]}}"#, "controller.q"),
        (r#"{"experiment": {"seedz": 3}}"#, "experiment.seedz"),
        (r#"{"plant": {"kind": "quadrotor", "x0": [0.0]}}"#, "plant.x0"),
    ];
    for (text, path) in cases {
        match Config::from_json_str(text) {
            Err(Error::Config { path: p, .. }) => assert_eq!(p, path, "{text}"),
            other => panic!("{text}: expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn seed_override_changes_hashes_but_not_invariants() {
    let a = small_matched();
    let mut b = a.clone();
    b.experiment.seed = 100;
    let (sa, la) = cli::execute(&a, Some(1)).unwrap();
    let (sb, lb) = cli::execute(&b, Some(1)).unwrap();
    assert_ne!(la[0].hash(), lb[0].hash());
    assert_eq!(sa.invariant_failures(), 0);
    assert_eq!(sb.invariant_failures(), 0);
    let (_, again) = cli::execute(&a, Some(1)).unwrap();
    assert!(la.iter().zip(&again).all(|(x, y)| x.hash() == y.hash()));
}

#[test]
fn empty_sweep_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    assert_eq!(cli::sweep(&small_matched(), "plant.w1", &cli::parse_values(""), &out, Some(1)).unwrap(), 0);
    assert!(!out.exists());
}

#[test]
fn sweep_writes_paired_rows_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_matched();
    cfg.experiment.seeds = 1;
    cfg.experiment.steps = 5;
    let values = cli::parse_values("0.25,0.5");
    assert_eq!(cli::sweep(&cfg, "plant.w1", &values, dir.path(), Some(1)).unwrap(), 0);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(format!("# {}", cli::SWEEP_SCHEMA).as_str()));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], &["param", "value", "controller"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for (i, value) in ["0.25", "0.5"].iter().enumerate() {
        assert_eq!(rows[2 * i][1], *value);
        assert_eq!(rows[2 * i][2], Variant::AdaptiveA.name());
        assert_eq!(rows[2 * i + 1][2], Variant::Benchmark.name());
    }
}

#[test]
fn sweep_rejects_unknown_parameters_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let err = cli::sweep(&small_matched(), "plant.mass", &cli::parse_values("1"), dir.path(), Some(1)).unwrap_err();
    assert!(matches!(err, Error::Config { ref path, .. } if path == "plant.mass"));
}

#[test]
fn binary_reports_usage_and_validation_errors() {
    let out = bin().args(["verify", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown suite"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"controller": {"r": -1.0}}"#).unwrap();
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("controller.r"));
}

#[test]
fn binary_takes_the_output_directory_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", bundled("toy").to_str().unwrap(), "--jobs", "1", "--seed", "3"])
        .env(cli::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("set_membership"));
    let cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["experiment"]["seed"], 3);
}

#[test]
fn binary_verify_suites_pass() {
    for suite in ["geometry", "mpc", "closed_loop"] {
        let out = bin().args(["verify", suite]).output().unwrap();
        assert!(out.status.success(), "{suite}: {}", String::from_utf8_lossy(&out.stdout));
    }
}
