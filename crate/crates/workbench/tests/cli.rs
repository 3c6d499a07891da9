use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_strokebench"));
    cmd.env_remove("STROKEBENCH_OUTPUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn strokebench")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth(dir: &Path, rows: &str) -> PathBuf {
    ok(&["synth", "--rows", rows, "--class-balance", "0.15", "--seed", "5", "--output-dir", dir.to_str().unwrap()]);
    dir.join("synthetic.csv")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file except the manifest, with contents.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["benchmark", "--help"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["benchmark", "--model", "perceptron"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["correlate", "--output-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input"));
}

#[test]
fn zero_runs_and_threads_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "200");
    let out_dir = tmp.path().join("o");
    let base = ["benchmark", "--input", input.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()];
    let mut zero_runs = base.to_vec();
    zero_runs.extend(["--runs", "0"]);
    assert_eq!(run(&zero_runs).status.code(), Some(1));
    let mut zero_threads = base.to_vec();
    zero_threads.extend(["--threads", "0"]);
    assert_eq!(run(&zero_threads).status.code(), Some(1));
}

#[test]
fn missing_input_file_exits_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.csv");
    let out = run(&["correlate", "--input", missing.to_str().unwrap(), "--output-dir", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn malformed_csv_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "id,gender,age\n1,Male,40\n").unwrap();
    let out = run(&["inspect", "--input", bad.to_str().unwrap(), "--output-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn benchmark_is_byte_identical_across_invocations_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "600");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4"].iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        ok(&[
            "benchmark",
            "--input",
            input.to_str().unwrap(),
            "--model",
            "mlp",
            "--features",
            "top4",
            "--runs",
            "6",
            "--threads",
            threads,
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        outputs.push(artifacts(&dir));
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn ablation_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "400");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(format!("abl{threads}"));
        ok(&[
            "ablate",
            "--input",
            input.to_str().unwrap(),
            "--model",
            "dt",
            "--runs",
            "3",
            "--threads",
            threads,
            "--output-dir",
            dir.to_str().unwrap(),
        ]);
        outputs.push(artifacts(&dir));
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"ablation_runs.csv") && names.contains(&"ablation_summary.csv"));
}

#[test]
fn config_file_values_apply_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "300");
    let toml_cfg = tmp.path().join("bench.toml");
    fs::write(
        &toml_cfg,
        format!("input = {:?}\nseed = 9\nruns = 2\nfeatures = \"top4\"\n\n[model]\nfamily = \"decision_tree\"\n", input.to_str().unwrap()),
    )
    .unwrap();

    let from_file = tmp.path().join("a");
    ok(&["benchmark", "--config", toml_cfg.to_str().unwrap(), "--output-dir", from_file.to_str().unwrap()]);
    let m = manifest(&from_file);
    assert_eq!(m["master_seed"], 9);
    assert_eq!(m["run_seeds"].as_array().unwrap().len(), 2);

    let overridden = tmp.path().join("b");
    ok(&[
        "benchmark",
        "--config",
        toml_cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--runs",
        "3",
        "--output-dir",
        overridden.to_str().unwrap(),
    ]);
    let m = manifest(&overridden);
    assert_eq!(m["master_seed"], 11);
    assert_eq!(m["run_seeds"].as_array().unwrap().len(), 3);

    let json_cfg = tmp.path().join("bench.json");
    fs::write(
        &json_cfg,
        serde_json::json!({"input": input, "seed": 9, "runs": 2, "features": "top4", "model": {"family": "decision_tree"}}).to_string(),
    )
    .unwrap();
    let from_json = tmp.path().join("c");
    ok(&["benchmark", "--config", json_cfg.to_str().unwrap(), "--output-dir", from_json.to_str().unwrap()]);
    assert_eq!(artifacts(&from_file), artifacts(&from_json));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "sead = 3\n").unwrap();
    let out = run(&["inspect", "--config", cfg.to_str().unwrap(), "--output-dir", tmp.path().to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn output_dir_env_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from-env");
    let out = bin()
        .args(["synth", "--rows", "50"])
        .env("STROKEBENCH_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("synthetic.csv").exists());
    assert!(target.join("manifest.json").exists());
}

#[test]
fn analysis_commands_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "500");
    let input = input.to_str().unwrap();
    let cases: [(&str, &[&str]); 5] = [
        ("inspect", &[]),
        ("correlate", &["correlation.csv"]),
        ("importance", &["importance.csv"]),
        ("chads2", &["chads2.csv", "chads2_summary.json"]),
        ("pca", &["scree.csv", "loadings.csv", "components.csv", "biplot.csv", "scores.csv"]),
    ];
    for (command, expected) in cases {
        let dir = tmp.path().join(command);
        ok(&[command, "--input", input, "--output-dir", dir.to_str().unwrap()]);
        let m = manifest(&dir);
        assert_eq!(m["command"], command);
        assert_eq!(m["input"]["sha256"].as_str().unwrap().len(), 64);
        for name in expected {
            assert!(dir.join(name).exists(), "{command} did not write {name}");
        }
    }
    let scree = fs::read_to_string(tmp.path().join("pca/scree.csv")).unwrap();
    assert_eq!(scree.lines().count(), 1 + 10);
}

#[test]
fn train_writes_model_and_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let input = synth(&tmp.path().join("d"), "400");
    for family in ["dt", "rf", "svm", "lasso", "elasticnet", "mlp", "cnn"] {
        let dir = tmp.path().join(family);
        ok(&["train", "--input", input.to_str().unwrap(), "--model", family, "--output-dir", dir.to_str().unwrap()]);
        for name in ["model.json", "test_metrics.json", "predictions.csv"] {
            assert!(dir.join(name).exists(), "{family} did not write {name}");
        }
    }
}
