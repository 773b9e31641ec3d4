//! End-to-end smoke tests of the `atyp` binary: each subcommand runs
//! against a small simulated dataset and leaves the documented artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn atyp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atyp"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn small_config(dir: &Path, n_signals: usize, n_anomalies: usize) -> String {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        format!(
            "seed = 1\n\n[generator]\nn_signals = {n_signals}\nn_anomalies = {n_anomalies}\nlength_range = [60, 120]\n"
        ),
    )
    .expect("config written");
    path.to_string_lossy().into_owned()
}

fn assert_success(output: &Output, context: &str) {
    assert!(
        output.status.success(),
        "{context} failed with {:?}\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn simulate_writes_dataset_artifacts() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 12, 2);
    let out = tmp.path().join("sim");
    let output = atyp(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_success(&output, "simulate");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("simulated 12 segments (2 anomalous)"), "{stdout}");
    for artifact in ["config.toml", "segments.csv", "labels.csv", "manifest.toml"] {
        assert!(out.join(artifact).is_file(), "missing {artifact}");
    }
}

#[test]
fn run_report_and_evaluate_chain() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 60, 3);
    let out = tmp.path().join("run");
    let out_str = out.to_str().unwrap();

    let output = atyp(&["run", "--config", &config, "--out", out_str]);
    assert_success(&output, "run");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("analysed 60 segments"), "{stdout}");
    assert!(stdout.contains("false alarms over X+Y channels"), "{stdout}");
    for artifact in [
        "segments.csv",
        "labels.csv",
        "features.csv",
        "model.toml",
        "clusters.csv",
        "reference_curves.csv",
        "aligned.csv",
        "tubes.csv",
        "cq_tables.csv",
        "verdicts.csv",
        "confusion.csv",
        "manifest.toml",
        "timings.toml",
    ] {
        assert!(out.join(artifact).is_file(), "missing {artifact}");
    }

    let output = atyp(&["report", "--run", out_str]);
    assert_success(&output, "report");
    assert!(out.join("report.txt").is_file());
    let plots: Vec<_> = fs::read_dir(out.join("plots")).unwrap().collect();
    assert!(!plots.is_empty(), "report wrote no plot CSVs");

    let output = atyp(&["evaluate", "--run", out_str]);
    assert_success(&output, "evaluate");
}

#[test]
fn run_with_single_method_restricts_verdicts() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 40, 2);
    let out = tmp.path().join("ct-only");
    let output = atyp(&[
        "run",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--method",
        "ct",
    ]);
    assert_success(&output, "run --method ct");
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    assert!(verdicts.lines().skip(1).all(|l| l.contains(",CT,")), "non-CT rows present");
    assert!(verdicts.lines().count() > 1, "no verdicts written");
}

#[test]
fn flag_overrides_beat_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let config = small_config(tmp.path(), 12, 2);
    let out = tmp.path().join("override");
    let output = atyp(&[
        "simulate",
        "--config",
        &config,
        "--n-signals",
        "9",
        "--n-anomalies",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&output, "simulate with overrides");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("simulated 9 segments (1 anomalous)"), "{stdout}");
}

#[test]
fn invalid_alpha_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("bad");
    let output = atyp(&[
        "run",
        "--alpha",
        "1.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!output.status.success(), "alpha outside (0,1) must be rejected");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpha"), "{stderr}");
}

#[test]
fn unknown_flag_is_rejected() {
    let output = atyp(&["run", "--no-such-flag"]);
    assert!(!output.status.success());
}

#[test]
fn help_lists_the_subcommands() {
    let output = atyp(&["--help"]);
    assert_success(&output, "--help");
    let stdout = String::from_utf8_lossy(&output.stdout);
    for subcommand in ["simulate", "run", "cluster", "align", "detect", "evaluate", "report"] {
        assert!(stdout.contains(subcommand), "help misses `{subcommand}`");
    }
}
