//! End-to-end checks of the `gpig` binary: exit codes, documented edge cases
//! and output formats.

use std::path::Path;
use std::process::{Command, Output};

use gpig_core::AttributionResult;
use serde_json::Value;
use tempfile::TempDir;

fn gpig(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpig"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("gpig runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let output = gpig(dir, args);
    assert_eq!(
        code(&output),
        0,
        "gpig {args:?}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

fn first_line(dir: &Path, file: &str) -> String {
    read(dir, file).lines().next().unwrap_or_default().to_string()
}

/// A temp dir holding a planted dataset and an MLP trained on it.
fn planted_workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "planted", "--out", "planted"]);
    ok(
        dir.path(),
        &["train", "--data", "planted/data.csv", "--epochs", "50", "--out", "mlp"],
    );
    dir
}

#[test]
fn linreg_demo_integrated_gradients_are_one_and_four() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "linreg-demo", "--out", "demo"]);
    ok(
        dir.path(),
        &[
            "attribute",
            "--objective",
            "linreg",
            "--data",
            "demo/data.csv",
            "--algorithm",
            "ig",
            "-T",
            "2000",
            "--out",
            "ig",
        ],
    );
    let result = AttributionResult::from_json(&read(dir.path(), "ig/result.json")).unwrap();
    assert!((result.scores[0] - 1.0).abs() <= 1e-6, "{:?}", result.scores);
    assert!((result.scores[1] - 4.0).abs() <= 1e-6, "{:?}", result.scores);
    assert_eq!(
        first_line(dir.path(), "ig/curve.csv"),
        "k,fraction,value,optimum,flagged"
    );
}

#[test]
fn equal_budgets_report_equal_gradient_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "correlated-linreg", "--out", "lr"]);
    let base = ["attribute", "--objective", "linreg", "--data", "lr/data.csv"];
    let run = |extra: &[&str], out: &str| {
        let args: Vec<&str> = base.iter().chain(extra).chain(&["--out", out]).copied().collect();
        ok(dir.path(), &args);
        AttributionResult::from_json(&read(dir.path(), &format!("{out}/result.json"))).unwrap()
    };
    let greedy = run(
        &["--algorithm", "greedy-pig", "-R", "8", "-z", "1", "-T", "16"],
        "greedy",
    );
    let ig = run(&["--algorithm", "ig", "-T", "128"], "ig");
    assert_eq!(greedy.diagnostics.gradient_evaluations, 128);
    assert_eq!(ig.diagnostics.gradient_evaluations, 128);
    let mut order = greedy.order.clone();
    order.sort_unstable();
    assert_eq!(order, (0..8).collect::<Vec<_>>(), "R z >= n gives a full permutation");
}

#[test]
fn truncated_model_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.json"), "{\"kind\": \"mlp\", \"layers\": [").unwrap();
    let output = gpig(dir.path(), &["gradcheck", "--model", "model.json"]);
    assert_eq!(code(&output), 2);
    assert!(String::from_utf8_lossy(&output.stderr).contains("model.json"));
}

#[test]
fn gradcheck_with_zero_points_passes_vacuously_with_a_warning() {
    let dir = planted_workspace();
    let output = ok(dir.path(), &["gradcheck", "--model", "mlp/model.json", "--points", "0"]);
    assert!(String::from_utf8_lossy(&output.stderr).contains("vacuously"));
    assert!(String::from_utf8_lossy(&output.stdout).contains("PASS"));
}

#[test]
fn gradcheck_passes_on_a_trained_model_with_data() {
    let dir = planted_workspace();
    let output = ok(
        dir.path(),
        &[
            "gradcheck",
            "--model",
            "mlp/model.json",
            "--data",
            "planted/data.csv",
            "--points",
            "5",
            "--out",
            "gc",
        ],
    );
    assert!(String::from_utf8_lossy(&output.stdout).contains("PASS, max rel err"));
    let report: Value = serde_json::from_str(&read(dir.path(), "gc/gradcheck.json")).unwrap();
    assert_eq!(report["pass"], Value::Bool(true));
    assert_eq!(report["checks"].as_array().unwrap().len(), 3);
}

#[test]
fn select_rejects_k_zero_and_k_above_feature_count() {
    let dir = planted_workspace();
    for k in ["0", "31", "2,100"] {
        let output = gpig(
            dir.path(),
            &[
                "select",
                "--model",
                "mlp/model.json",
                "--data",
                "planted/data.csv",
                "--k",
                k,
                "-T",
                "1",
            ],
        );
        assert_eq!(code(&output), 2, "k = {k}");
    }
}

#[test]
fn select_writes_documented_csv() {
    let dir = planted_workspace();
    ok(
        dir.path(),
        &[
            "select",
            "--model",
            "mlp/model.json",
            "--data",
            "planted/data.csv",
            "--k",
            "3,5",
            "-T",
            "1",
            "--epochs",
            "30",
            "--out",
            "sel",
        ],
    );
    let csv = read(dir.path(), "sel/selection.csv");
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,val_loss,selected");
    assert_eq!(lines.len(), 3);
}

#[test]
fn replicate_demo_rejects_zero_temperature() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gpig(dir.path(), &["replicate-demo", "--beta", "0"])), 2);
}

#[test]
fn replicate_demo_default_table_shows_the_redundancy_gap() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["replicate-demo", "--out", "rep"]);
    let csv = read(dir.path(), "rep/replicate.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,ig_set,ig_value,greedy_pig_set,greedy_pig_value"));
    let row2: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row2[0], "2");
    assert_eq!(row2[2].parse::<f64>().unwrap(), 5.0);
    assert_eq!(row2[4].parse::<f64>().unwrap(), 6.0);
}

#[test]
fn replicate_demo_without_replicas_orders_agree() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["replicate-demo", "--counts", "1,1", "--out", "rep"]);
    let report: Value = serde_json::from_str(&read(dir.path(), "rep/replicate.json")).unwrap();
    assert_eq!(report["ig"]["order"], report["greedy_pig"]["order"]);
}

#[test]
fn graph_compress_needs_the_split_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "sbm", "--out", "sbm"]);
    ok(
        dir.path(),
        &["train", "--graph", "sbm", "--epochs", "20", "--out", "gcn"],
    );
    ok(
        dir.path(),
        &[
            "graph-compress",
            "--model",
            "gcn/model.json",
            "--graph",
            "sbm",
            "--ratios",
            "0,1",
            "-T",
            "4",
            "--out",
            "c",
        ],
    );
    assert_eq!(
        first_line(dir.path(), "c/compression.csv"),
        "ratio,accuracy,selector,seed"
    );
    std::fs::remove_file(dir.path().join("sbm/split.json")).unwrap();
    let output = gpig(
        dir.path(),
        &[
            "graph-compress",
            "--model",
            "gcn/model.json",
            "--graph",
            "sbm",
            "--ratios",
            "0,1",
        ],
    );
    assert_eq!(code(&output), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "linreg-demo", "--out", "demo"]);
    std::fs::write(dir.path().join("run.json"), r#"{"algorithm": "ig", "steps": 10}"#).unwrap();
    ok(
        dir.path(),
        &[
            "attribute",
            "--config",
            "run.json",
            "--objective",
            "linreg",
            "--data",
            "demo/data.csv",
            "-T",
            "20",
            "--out",
            "a",
        ],
    );
    let result = AttributionResult::from_json(&read(dir.path(), "a/result.json")).unwrap();
    assert_eq!(result.algorithm, "ig");
    assert_eq!(result.diagnostics.gradient_evaluations, 20);
}

#[test]
fn unknown_config_fields_and_subcommands_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"stpes": 10}"#).unwrap();
    assert_eq!(code(&gpig(dir.path(), &["replicate-demo", "--config", "run.json"])), 2);
    assert_eq!(code(&gpig(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn shipped_example_model_passes_gradcheck_tightly() {
    let dir = tempfile::tempdir().unwrap();
    let model = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/example_mlp.json");
    let output = ok(dir.path(), &["gradcheck", "--model", model.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    let summary = stdout.lines().last().unwrap();
    let err: f64 = summary
        .strip_prefix("PASS, max rel err ")
        .expect(summary)
        .parse()
        .unwrap();
    assert!(err <= 1e-5, "{summary}");
}
