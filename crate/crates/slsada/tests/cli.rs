//! Black-box tests of the `slsada` binary: subcommands, exit codes, config
//! precedence, and artifact layout.

use std::path::Path;
use std::process::{Command, Output};

fn slsada(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slsada"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn synth_files(dir: &Path, dim: &str) {
    let out = slsada(
        &[
            "synth",
            "--classes",
            "3",
            "--dim",
            dim,
            "--samples-per-class",
            "30",
            "--rotation",
            "15",
            "--offset",
            "1.0",
            "--cov-scale",
            "0.3",
            "--mean-scale",
            "0.5",
            "--seed",
            "7",
            "--out",
            "data",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_four_files_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    synth_files(dir.path(), "10");
    for name in [
        "source_features.csv",
        "target_features.csv",
        "source_labels.txt",
        "target_labels.txt",
    ] {
        assert!(dir.path().join("data").join(name).exists(), "{name} missing");
    }
    let first = std::fs::read(dir.path().join("data/source_features.csv")).unwrap();
    synth_files(dir.path(), "10");
    let second = std::fs::read(dir.path().join("data/source_features.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn run_echoes_preset_defaults() {
    let dir = tempfile::tempdir().unwrap();
    synth_files(dir.path(), "25");
    let out = slsada(
        &[
            "run",
            "--preset",
            "small",
            "--source",
            "data/source_features.csv",
            "--target",
            "data/target_features.csv",
            "--labels-source",
            "data/source_labels.txt",
            "--labels-target",
            "data/target_labels.txt",
            "--out",
            "results",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("\"subspace_dim\":20"), "{text}");
    assert!(text.contains("\"scale_regularizer\":0.05"), "{text}");
    assert!(text.contains("\"clustering_weight\":0.01"), "{text}");
    assert!(text.contains("\"iterations\":5"), "{text}");
    for name in [
        "run_report.json",
        "predictions_source.txt",
        "predictions_target.txt",
        "iterations.jsonl",
    ] {
        assert!(dir.path().join("results").join(name).exists(), "{name}");
    }
    let preds =
        std::fs::read_to_string(dir.path().join("results/predictions_target.txt")).unwrap();
    assert_eq!(preds.lines().count(), 90);
}

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    synth_files(dir.path(), "10");
    std::fs::write(
        dir.path().join("exp.conf"),
        "# experiment settings\nk = 4\ngamma = 0.02\n",
    )
    .unwrap();

    let base = [
        "run",
        "--config",
        "exp.conf",
        "--source",
        "data/source_features.csv",
        "--target",
        "data/target_features.csv",
        "--labels-source",
        "data/source_labels.txt",
    ];
    let out = slsada(&base, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("\"subspace_dim\":4"));

    let mut with_flag = base.to_vec();
    with_flag.extend_from_slice(&["--k", "6"]);
    let out = slsada(&with_flag, dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("\"subspace_dim\":6"));
    assert!(stdout(&out).contains("\"clustering_weight\":0.02"));
}

#[test]
fn missing_file_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = slsada(
        &[
            "run",
            "--source",
            "nope.csv",
            "--target",
            "nope.csv",
            "--labels-source",
            "nope.txt",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = slsada(&["run", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_required_path_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = slsada(&["run"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oversized_subspace_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_files(dir.path(), "10");
    let out = slsada(
        &[
            "run",
            "--k",
            "60",
            "--source",
            "data/source_features.csv",
            "--target",
            "data/target_features.csv",
            "--labels-source",
            "data/source_labels.txt",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds feature dimension"));
}

#[test]
fn selfcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = slsada(&["selfcheck"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 5, "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn protocol_on_synthetic_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "protocol",
        "--classes",
        "3",
        "--dim",
        "8",
        "--samples-per-class",
        "15",
        "--rotation",
        "10",
        "--offset",
        "0.5",
        "--cov-scale",
        "0.5",
        "--mean-scale",
        "0.6",
        "--k",
        "4",
        "--neighbors",
        "6",
        "--per-class",
        "3",
        "--repeats",
        "2",
        "--baseline",
        "source-only",
        "--out",
        "p1",
    ];
    let out = slsada(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut args2 = args.to_vec();
    let n = args2.len();
    args2[n - 1] = "p2";
    let out = slsada(&args2, dir.path());
    assert!(out.status.success());

    let a = std::fs::read(dir.path().join("p1/run_report.json")).unwrap();
    let b = std::fs::read(dir.path().join("p2/run_report.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert!(dir.path().join("p1/summary.csv").exists());
}

#[test]
fn sweep_emits_csv_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = slsada(
        &[
            "sweep",
            "--param",
            "gamma",
            "--values",
            "0,0.01",
            "--classes",
            "3",
            "--dim",
            "8",
            "--samples-per-class",
            "15",
            "--rotation",
            "10",
            "--offset",
            "0.5",
            "--cov-scale",
            "0.5",
            "--mean-scale",
            "0.6",
            "--k",
            "4",
            "--neighbors",
            "6",
            "--per-class",
            "3",
            "--repeats",
            "2",
            "--out",
            "sweep",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "param,value,mean_s,std_s,mean_t,std_t");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("gamma,0,"));
    assert!(lines[2].starts_with("gamma,0.01,"));
}

#[test]
fn run_dumps_embeddings_on_request() {
    let dir = tempfile::tempdir().unwrap();
    synth_files(dir.path(), "10");
    let out = slsada(
        &[
            "run",
            "--k",
            "2",
            "--neighbors",
            "8",
            "--source",
            "data/source_features.csv",
            "--target",
            "data/target_features.csv",
            "--labels-source",
            "data/source_labels.txt",
            "--labels-target",
            "data/target_labels.txt",
            "--out",
            "results",
            "--dump-embeddings",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("results/embeddings.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "domain,true_label,predicted_label,z_1,z_2");
    assert_eq!(lines.count(), 180);
}
