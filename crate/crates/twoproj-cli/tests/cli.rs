//! Binary-level checks: exit codes, document shape, and byte stability.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoproj")).args(args).output().expect("binary spawns")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stdout_text(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is utf8")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is utf8")
}

fn parse_doc(output: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout_text(output)).expect("stdout is one JSON document")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("twoproj-cli-tests");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join(name);
    std::fs::write(&path, contents).expect("write temp input");
    path
}

/// P projects onto the first axis, Q onto the diagonal; every entry and both
/// idempotency products are exact in floating point.
const EXACT_PAIR: &str = r#"{
  "p": {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[0,0]]},
  "q": {"rows": 2, "cols": 2, "entries": [[0.5,0],[0.5,0],[0.5,0],[0.5,0]]}
}"#;

const EQUAL_PAIR: &str = r#"{
  "p": {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[0,0]]},
  "q": {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[0,0]]}
}"#;

const NON_PROJECTION_PAIR: &str = r#"{
  "p": {"rows": 2, "cols": 2, "entries": [[2,0],[0,0],[0,0],[2,0]]},
  "q": {"rows": 2, "cols": 2, "entries": [[1,0],[0,0],[0,0],[0,0]]}
}"#;

#[test]
fn analyze_with_default_seed_passes_and_echoes_config() {
    let output = run(&["analyze", "--format", "structured"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    assert_eq!(doc["command"], "analyze");
    assert_eq!(doc["config"]["seed"], 42);
    assert_eq!(doc["config"]["dim"], 6);
    assert_eq!(doc["report"]["pass"], true);
    let residual = doc["report"]["angle_symmetry"]["residual"].as_f64().expect("residual");
    assert!(residual <= 1e-10, "angle symmetry residual {residual:.3e}");
    let unitary = doc["report"]["unitary"]["max"].as_f64().expect("unitary residual");
    assert!(unitary <= 1e-10, "unitary residual {unitary:.3e}");
}

#[test]
fn structured_analyze_output_is_byte_stable() {
    let args = ["analyze", "--format", "structured", "--seed", "9", "--dim", "7"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn structured_sweep_output_is_byte_stable() {
    let args = ["sweep", "--count", "12", "--grid", "251", "--format", "structured"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0, "stderr: {}", stderr_text(&first));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn analyze_rejects_a_non_projection_input() {
    let path = temp_file("non_projection.json", NON_PROJECTION_PAIR);
    let output = run(&["analyze", "--input", path.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 2);
    assert!(stderr_text(&output).contains("is not a projection"));
}

#[test]
fn analyze_rejects_malformed_json() {
    let path = temp_file("malformed.json", "not a document {");
    let output = run(&["analyze", "--input", path.to_str().expect("utf8 path")]);
    assert_eq!(code(&output), 2);
    assert!(stderr_text(&output).contains("not a pair document"));
}

#[test]
fn analyze_reports_a_missing_input_file() {
    let output = run(&["analyze", "--input", "/nonexistent/pair.json"]);
    assert_eq!(code(&output), 2);
    assert!(stderr_text(&output).contains("cannot read"));
}

#[test]
fn analyze_on_equal_projections_reports_angle_zero() {
    let path = temp_file("equal_pair.json", EQUAL_PAIR);
    let output =
        run(&["analyze", "--input", path.to_str().expect("utf8 path"), "--format", "structured"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    assert_eq!(doc["report"]["angle"].as_f64(), Some(0.0));
    assert_eq!(doc["report"]["generic_dim"], 0);
    assert_eq!(doc["report"]["pass"], true);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let output = run(&["scenario", "--scenario", "bogus-name"]);
    assert_eq!(code(&output), 2);
    assert!(stderr_text(&output).contains("unknown scenario"));
}

#[test]
fn even_grid_count_is_a_usage_error() {
    let output = run(&["scenario", "--scenario", "pqp-nonconvergence", "--grid", "1000"]);
    assert_eq!(code(&output), 2);
    assert!(stderr_text(&output).contains("odd"));
    // Echoed options are validated even by commands that do not use them.
    let output = run(&["analyze", "--grid", "1000"]);
    assert_eq!(code(&output), 2);
    let output = run(&["analyze", "--dim", "1"]);
    assert_eq!(code(&output), 2);
}

#[test]
fn every_scenario_certificate_passes_on_a_coarse_grid() {
    for name in [
        "semiharmonious-not-harmonious",
        "range-2ipq-fails",
        "no-common-unitary",
        "pqp-nonconvergence",
        "invariant-submodule",
        "matched-transfer",
    ] {
        let output =
            run(&["scenario", "--scenario", name, "--grid", "251", "--format", "structured"]);
        assert_eq!(code(&output), 0, "{name} stderr: {}", stderr_text(&output));
        let doc = parse_doc(&output);
        assert_eq!(doc["report"]["scenario"], name);
        assert_eq!(doc["report"]["pass"], true, "{name} certificate");
        assert_eq!(doc["report"]["certificate"]["pass"], true, "{name} certificate body");
    }
}

#[test]
fn sweep_with_zero_count_emits_an_empty_passing_report() {
    let output = run(&["sweep", "--count", "0", "--format", "structured"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    assert_eq!(doc["report"]["pairs"]["count"], 0);
    assert_eq!(doc["report"]["pairs"]["violations"], 0);
    assert!(doc["report"]["angle_histogram"].as_array().expect("histogram").is_empty());
    assert!(doc["report"]["grid_refinement"].is_null());
    assert_eq!(doc["report"]["pass"], true);
}

#[test]
fn sweep_default_grid_ladder_stays_above_the_resolution_floor() {
    let output = run(&["sweep", "--count", "2", "--format", "structured"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    let refine = &doc["report"]["grid_refinement"];
    let counts: Vec<u64> = refine["rows"]
        .as_array()
        .expect("rows")
        .iter()
        .map(|r| r["n_samples"].as_u64().expect("n_samples"))
        .collect();
    // The requested base of 1001 stays in the ladder, but the fourfold-finer
    // level past the detection floor is replaced by a coarser one.
    assert_eq!(counts, [251, 1001, 4001]);
    assert!(refine["resolution_floor_delta"].as_f64().expect("floor") > 0.0);
    assert_eq!(doc["report"]["pass"], true);
}

#[test]
fn sweep_reports_refinement_rows_and_no_violations() {
    let output = run(&["sweep", "--count", "20", "--grid", "251", "--format", "structured"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    assert_eq!(doc["report"]["pairs"]["violations"], 0);
    let rows = doc["report"]["grid_refinement"]["rows"].as_array().expect("rows");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["n_samples"], 251);
    assert_eq!(rows[2]["n_samples"], 4001);
    for row in rows {
        let delta = row["delta"].as_f64().expect("delta");
        let residual = row["residual"].as_f64().expect("residual");
        assert!(residual <= 2.0 * delta * delta, "residual {residual:.3e} at delta {delta:.3e}");
    }
    assert_eq!(doc["report"]["grid_refinement"]["ratios_in_window"], true);
}

#[test]
fn strict_zero_tolerance_reports_an_invariant_violation() {
    let path = temp_file("exact_pair.json", EXACT_PAIR);
    let output = run(&["analyze", "--input", path.to_str().expect("utf8 path"), "--tol", "0"]);
    assert_eq!(code(&output), 3, "stderr: {}", stderr_text(&output));
    assert!(stderr_text(&output).contains("invariant violation"));
}

#[test]
fn out_flag_writes_the_document_and_keeps_stdout_quiet() {
    let out_path = std::env::temp_dir().join("twoproj-cli-tests").join("analyze_out.json");
    std::fs::create_dir_all(out_path.parent().expect("parent")).expect("temp dir");
    let output = run(&[
        "analyze",
        "--format",
        "structured",
        "--out",
        out_path.to_str().expect("utf8 path"),
    ]);
    assert_eq!(code(&output), 0);
    assert!(output.stdout.is_empty());
    let written = std::fs::read_to_string(&out_path).expect("document written");
    let doc: serde_json::Value = serde_json::from_str(&written).expect("valid JSON");
    assert_eq!(doc["report"]["pass"], true);
}

#[test]
fn words_closed_forms_match_assembled_norms() {
    let output = run(&["words", "--format", "structured", "--seed", "5"]);
    assert_eq!(code(&output), 0, "stderr: {}", stderr_text(&output));
    let doc = parse_doc(&output);
    let deviation = doc["report"]["max_norm_deviation"].as_f64().expect("deviation");
    assert!(deviation <= 1e-10, "norm deviation {deviation:.3e}");
    assert_eq!(doc["report"]["lower_bounds"]["hypothesis_met"], true);
    assert_eq!(doc["report"]["lower_bounds"]["sum_bound"]["pass"], true);
    assert_eq!(doc["report"]["lower_bounds"]["head_bound"]["pass"], true);
}

#[test]
fn halmos_and_unitary_subcommands_pass_on_generated_pairs() {
    for command in ["halmos", "unitary"] {
        let output = run(&[command, "--seed", "11", "--dim", "8"]);
        assert_eq!(code(&output), 0, "{command} stderr: {}", stderr_text(&output));
        assert!(stdout_text(&output).contains("verdict: PASS"));
    }
}
