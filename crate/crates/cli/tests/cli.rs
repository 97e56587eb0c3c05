use std::path::Path;
use std::process::{Command, Output};

fn mpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpl")).args(args).output().unwrap()
}

const SMALL: &[&str] = &[
    "--set",
    "corpus_spec.n_labeled=12",
    "--set",
    "corpus_spec.n_unlabeled=12",
    "--set",
    "corpus_spec.n_valid=6",
    "--set",
    "corpus_spec.n_test=6",
    "--set",
    "model.hidden=6",
    "--set",
    "base_train.epochs=1",
    "--set",
    "train.epochs=1",
];

fn run_mode(mode: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![mode, "--out", out.to_str().unwrap(), "--deterministic"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    mpl(&args)
}

#[test]
fn default_config_is_valid_json() {
    let out = mpl(&["default-config"]);
    assert!(out.status.success());
    let config: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(config["w"], 0.5);
    assert_eq!(config["corpus_spec"]["vocab"], 8);
}

#[test]
fn train_mpl_prints_summary_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_mode("train-mpl", dir.path(), &["--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["run_id"], "train-mpl-s3");
    assert_eq!(summary["seed"], 3);
    assert!(summary["ter"]["online"].is_number());
    for name in [
        "summary.json",
        "metrics.csv",
        "manifest.json",
        "online.ckpt",
        "offline.ckpt",
        "base.ckpt",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"run_id": "from-file", "w": 0.25}"#).unwrap();
    let out = run_mode(
        "train-mpl",
        &dir.path().join("run"),
        &["--config", config.to_str().unwrap(), "--set", "w=0.75"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["run_id"], "from-file");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["w"], 0.75);
}

#[test]
fn errors_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.mplc");
    let out = run_mode(
        "train-base",
        dir.path(),
        &["--set", &format!("corpus=\"{}\"", missing.display())],
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let report: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(report["error"], "io");
    assert!(dir.path().join("error.json").is_file());

    let bad = mpl(&["train-base", "--set", "no_such_field=1"]);
    assert_eq!(bad.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(bad.stderr.trim_ascii()).unwrap();
    assert_eq!(report["error"], "invalid_config");
}

#[test]
fn identical_invocations_give_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_mode("train-pl", &dir.path().join("a"), &[]);
    let b = run_mode("train-pl", &dir.path().join("b"), &[]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
