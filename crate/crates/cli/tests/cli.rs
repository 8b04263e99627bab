use std::path::PathBuf;
use std::process::Command;

use stylefb_cli::{run, EXIT_CONFIG, EXIT_OK, EXIT_SYNTAX};
use stylefb_core::report::FeedbackReport;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("stylefb").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const NOW: &str = "2026-03-04T10:00:00Z";

#[test]
fn analyze_text_matches_golden() {
    let path = fixture("mars_weight.py");
    let (code, out, _) = run_args(&["analyze", path.to_str().unwrap(), "--now", NOW]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("0.378"));
    assert_eq!(out, std::fs::read_to_string(fixture("mars_weight.report.txt")).unwrap());
}

#[test]
fn analyze_json_reparses() {
    let path = fixture("mars_weight.py");
    let (code, out, _) = run_args(&["analyze", path.to_str().unwrap(), "--now", NOW, "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let report = FeedbackReport::from_json(&out).unwrap();
    assert_eq!(report.problem_id, "mars_weight");
    assert!(!report.degraded);
}

#[test]
fn exit_codes() {
    let (code, _, err) = run_args(&["analyze", "/definitely/missing.py"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("cannot read"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.py");
    std::fs::write(&bad, "def main(:\n    pass\n").unwrap();
    let (code, _, err) = run_args(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_SYNTAX);
    assert!(err.contains("line 1"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[weights]\ndelay = 0.5\nrealtime = 0.5\nnudge = 0.5\n").unwrap();
    let (code, _, err) = run_args(&["serve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("weights"));

    let (code, _, _) = run_args(&["analyze"]);
    assert_eq!(code, EXIT_CONFIG, "usage errors are configuration errors");
}

#[test]
fn live_transport_without_endpoint_is_a_config_error() {
    // Run the binary so the environment change stays out of this process.
    let out = Command::new(env!("CARGO_BIN_EXE_stylefb"))
        .args(["analyze", fixture("mars_weight.py").to_str().unwrap(), "--transport", "live"])
        .env_remove("STYLEFB_LLM_ENDPOINT")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("STYLEFB_LLM_ENDPOINT"));
}

#[test]
fn metrics_on_fixture_empty_and_corrupt_logs() {
    let log = core_fixture("traces20.jsonl");
    let (code, out, _) = run_args(&["metrics", log.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("incorporation among viewing style editors: 6/8 (75.0%)"), "{out}");

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let (code, out, _) = run_args(&["metrics", empty.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["traces"], 0);

    let corrupt = dir.path().join("corrupt.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.insert_str(0, "{not json\n");
    std::fs::write(&corrupt, text).unwrap();
    let (code, out, err) = run_args(&["metrics", corrupt.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("warning") && err.contains("line 1"));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["traces"], 20);
}

#[test]
fn metrics_accepts_trace_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traces.json");
    let src = std::fs::read_to_string(fixture("mars_weight.py")).unwrap();
    let renamed = src.replace("s = ", "message = ").replace("+ s)", "+ message)").replace("z = ", "mars_weight = ").replace("str(z)", "str(mars_weight)");
    let traces = serde_json::json!([{
        "student_id": "a",
        "problem_id": "mars",
        "snapshots": [
            {"at": "2026-03-04T10:00:00Z", "source": src, "tests_passed": true},
            {"at": "2026-03-04T10:05:00Z", "source": renamed, "tests_passed": true}
        ]
    }]);
    std::fs::write(&path, traces.to_string()).unwrap();
    let (code, out, _) = run_args(&["metrics", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!((v["non_viewer_editors"].clone(), v["label_counts"]["style"].clone()), (1.into(), 1.into()));
}
