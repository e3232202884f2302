use std::path::Path;
use std::process::{Command, Output};

use thermopinn::harness::{load_checkpoint, CHECKPOINT_FILE, METRICS_FILE};
use thermopinn::TrainStatus;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermopinn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_train(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "architecture=2-8-4",
        "--set",
        "levels=2",
        "--set",
        "train_level=1",
        "--set",
        "grid_points=10",
        "--set",
        "train.max_epochs=20",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn trivial_threshold_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_train(dir.path(), &["--set", "train.threshold=1e10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ck = load_checkpoint(&dir.path().join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(ck.status, TrainStatus::Converged);
    for f in ["metrics.csv", "error_report.json", "error_field.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn missing_config_names_the_path() {
    let out = run(&["train", "--config", "/no/such/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/config.json"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--set", "train.bogus=1"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--set", "train.threshold=-2"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn same_seed_gives_identical_files() {
    // The output directory is part of the echoed config, so both runs use
    // the same relative path from different working directories.
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = Command::new(env!("CARGO_BIN_EXE_thermopinn"))
            .current_dir(d.path())
            .args(["train", "--out", "run", "--seed", "3", "--plots"])
            .args(["--set", "architecture=2-8-4", "--set", "levels=2", "--set", "train_level=1"])
            .args(["--set", "grid_points=10", "--set", "train.max_epochs=20"])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for f in [CHECKPOINT_FILE, METRICS_FILE, "error_report.json", "error_field.csv", "residuals.svg"] {
        assert_eq!(
            std::fs::read(a.path().join("run").join(f)).unwrap(),
            std::fs::read(b.path().join("run").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn bare_run_leaves_augmentation_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_train(dir.path(), &["--augmented", "false"]).status.success());
    let text = std::fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(&row[6..9], ["", "", ""]);
}

#[test]
fn evaluate_and_transfer() {
    let dir = tempfile::tempdir().unwrap();
    assert!(small_train(dir.path(), &[]).status.success());
    let ck = dir.path().join(CHECKPOINT_FILE);
    let ck_str = ck.to_str().unwrap();

    let eval_dir = dir.path().join("eval");
    let out = run(&["evaluate", "--checkpoint", ck_str, "--out", eval_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval_dir.join("error_report.json").exists());

    let t_dir = dir.path().join("transfer");
    let out = run(&[
        "transfer",
        "--checkpoint",
        ck_str,
        "--preset",
        "half-domain",
        "--out",
        t_dir.to_str().unwrap(),
        "--set",
        "levels=2",
        "--set",
        "train_level=1",
        "--set",
        "grid_points=10",
        "--set",
        "train.max_epochs=5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(t_dir.join("transfer_summary.json")).unwrap();
    assert!(summary.contains("\"x_min\": 0.0"));
    assert!(t_dir.join("cold_metrics.csv").exists());

    let out = run(&["transfer", "--checkpoint", ck_str, "--set", "architecture=2-9-4"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"format_version\": 1, \"architecture\": ").unwrap();
    let out = run(&["evaluate", "--checkpoint", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sample_writes_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sample", "--out", dir.path().to_str().unwrap(), "--set", "levels=3", "--set", "train_level=0"]);
    assert!(out.status.success());
    for k in 0..3 {
        assert!(dir.path().join(format!("collocation_level{k}.csv")).exists());
    }
}

#[test]
fn studies_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "convergence-study",
        "--out",
        d,
        "--set",
        "architecture=2-4-4",
        "--set",
        "levels=2",
        "--set",
        "train_level=0",
        "--set",
        "thresholds=[1e4,1e3]",
        "--set",
        "grid_points=5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("convergence_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(dir.path().join("fits.json").exists());

    let out = run(&[
        "architecture-study",
        "--out",
        d,
        "--set",
        "levels=1",
        "--set",
        "train_level=0",
        "--set",
        "train.threshold=1e10",
    ]);
    assert!(out.status.success());
    let heat = std::fs::read_to_string(dir.path().join("architecture_heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 8);
}

#[test]
fn verify_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 8);
}

#[test]
fn paper_scale_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sample",
        "--paper-scale",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("paper-scale"));
    assert!(dir.path().join("collocation_level7.csv").exists());
}
