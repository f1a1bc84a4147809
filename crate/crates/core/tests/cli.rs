//! End-to-end tests of the command-line interface: exit codes, solution
//! files, diagnostics, oracle cross-check and chart output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sample_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waterladder"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("waterladder-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn solve_writes_solution_with_passing_kkt() {
    let dir = tmp_dir("solve");
    let out = dir.join("sol.json");
    let output = run(&[
        "solve",
        "--input",
        sample_path("worked_example.json").to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--kkt",
    ]);
    assert!(output.status.success(), "stderr: {}", String::from_utf8_lossy(&output.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let sol: serde_json::Value = serde_json::from_str(&text).unwrap();
    let x: Vec<f64> =
        sol["x"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let expect = [-0.8, -1.2, 1.9, -1.8];
    for (i, e) in expect.iter().enumerate() {
        assert!((x[i] - e).abs() < 1e-3, "x[{i}] = {}", x[i]);
    }
    assert_eq!(sol["trace"].as_array().unwrap().len(), 2);
    assert_eq!(sol["iterations"], 2);
    assert_eq!(sol["kkt"]["pass"], true, "verification report should pass: {}", sol["kkt"]);
}

#[test]
fn infeasible_input_exits_2_and_names_the_constraint() {
    let output = run(&["solve", "--input", sample_path("infeasible.json").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let diag: serde_json::Value =
        serde_json::from_str(stderr.lines().next().unwrap()).expect("structured diagnostics");
    assert_eq!(diag["kind"], "infeasible");
    assert_eq!(diag["constraint"], 2, "diagnostic: {diag}");
}

#[test]
fn oracle_flag_reports_a_bounded_gap() {
    let output = run(&[
        "solve",
        "--input",
        sample_path("worked_example.json").to_str().unwrap(),
        "--oracle",
        "--grid",
        "41",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout.lines().find(|l| l.starts_with("oracle:")).expect("oracle line");
    assert!(line.contains("ok=true"), "oracle gap should be inside the bound: {line}");
}

#[test]
fn chart_file_holds_samples_and_markers() {
    let dir = tmp_dir("chart");
    let chart = dir.join("chart.csv");
    let output = run(&[
        "solve",
        "--input",
        sample_path("worked_example.json").to_str().unwrap(),
        "--output",
        dir.join("s.json").to_str().unwrap(),
        "--chart",
        chart.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&chart).unwrap();
    assert!(text.starts_with("row,index,varsigma,eta,xi,c,value"));
    assert!(text.lines().filter(|l| l.starts_with("sample,")).count() >= 100);
    assert_eq!(text.lines().filter(|l| l.starts_with("marker_solution,")).count(), 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("marker_prefix,")).count(), 4);
}

#[test]
fn malformed_json_exits_3() {
    let dir = tmp_dir("badjson");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let output = run(&["solve", "--input", bad.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn no_skip_rule_flag_matches_default_output() {
    let dir = tmp_dir("skip");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    let sample = sample_path("worked_example.json");
    let run_a =
        run(&["solve", "--input", sample.to_str().unwrap(), "--output", a.to_str().unwrap()]);
    let run_b = run(&[
        "solve",
        "--input",
        sample.to_str().unwrap(),
        "--output",
        b.to_str().unwrap(),
        "--no-skip-rule",
    ]);
    assert!(run_a.status.success() && run_b.status.success());
    assert_eq!(
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
        "skip rule must not change the solution file"
    );
}

#[test]
fn trace_flag_prints_the_block_log() {
    let dir = tmp_dir("trace");
    let output = run(&[
        "solve",
        "--input",
        sample_path("worked_example.json").to_str().unwrap(),
        "--output",
        dir.join("s.json").to_str().unwrap(),
        "--trace",
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("block 1:"), "stdout: {stdout}");
    assert!(stdout.contains("k=2"));
    assert!(stdout.contains("iterations: 2"));
}

#[test]
fn batch_mode_writes_one_solution_per_input() {
    let dir = tmp_dir("batch");
    let first = dir.join("one.json");
    let second = dir.join("two.json");
    std::fs::copy(sample_path("worked_example.json"), &first).unwrap();
    std::fs::copy(sample_path("worked_example.json"), &second).unwrap();
    let output = run(&[
        "solve",
        "--input",
        first.to_str().unwrap(),
        "--input",
        second.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(dir.join("one.sol.json").exists());
    assert!(dir.join("two.sol.json").exists());
}

#[test]
fn missing_input_exits_3() {
    let output = run(&["solve", "--input", "/nonexistent/nowhere.json"]);
    assert_eq!(output.status.code(), Some(3));
}
