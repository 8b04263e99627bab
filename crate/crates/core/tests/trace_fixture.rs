//! The committed 20-trace event log and its hand-derived classification table.

use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use serde::Deserialize;

use stylefb_core::analytics::{trace_metrics, traces_from_events, EditLabel};
use stylefb_core::llm::{MockTransport, PromptTemplates};
use stylefb_core::pipeline::{FeedbackConfig, FeedbackEngine};
use stylefb_core::service::{read_events, GroupWeights, ReportId, ServiceSettings, SessionService};

const MARS_WEIGHT: &str = include_str!("fixtures/mars_weight.py");

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Debug, Deserialize)]
struct ExpectedRow {
    student_id: String,
    viewer: bool,
    reached_functionality: bool,
    edits: Vec<EditLabel>,
    label: Option<EditLabel>,
    incorporated: bool,
}

#[derive(Debug, Deserialize)]
struct Expected {
    traces: usize,
    viewers: usize,
    non_viewers: usize,
    viewer_editors: usize,
    non_viewer_editors: usize,
    viewer_editor_fraction: f64,
    non_viewer_editor_fraction: f64,
    label_counts: std::collections::BTreeMap<EditLabel, usize>,
    style_editors: usize,
    incorporating_editors: usize,
    incorporation_rate: f64,
    rows: Vec<ExpectedRow>,
}

#[test]
fn twenty_trace_fixture_matches_hand_table() {
    let (events, warnings) = read_events(&fixture("traces20.jsonl")).unwrap();
    assert!(warnings.is_empty());
    let expected: Expected =
        serde_json::from_str(&std::fs::read_to_string(fixture("traces20_expected.json")).unwrap()).unwrap();
    let m = trace_metrics(&traces_from_events(&events));

    let rows: Vec<_> = m
        .per_trace
        .iter()
        .map(|t| {
            (
                t.student_id.clone(),
                t.viewer,
                t.reached_functionality,
                t.edits.iter().map(|e| e.label).collect::<Vec<_>>(),
                t.label,
                t.incorporated,
            )
        })
        .collect();
    let want: Vec<_> = expected
        .rows
        .iter()
        .map(|r| (r.student_id.clone(), r.viewer, r.reached_functionality, r.edits.clone(), r.label, r.incorporated))
        .collect();
    assert_eq!(rows, want);
    assert_eq!(
        (m.traces, m.viewers, m.non_viewers, m.viewer_editors, m.non_viewer_editors),
        (expected.traces, expected.viewers, expected.non_viewers, expected.viewer_editors, expected.non_viewer_editors)
    );
    assert_eq!(m.label_counts, expected.label_counts);
    assert_eq!((m.style_editors, m.incorporating_editors), (expected.style_editors, expected.incorporating_editors));
    // Fractions in the table are rounded to 1e-9.
    for (got, want) in [
        (m.viewer_editor_fraction, expected.viewer_editor_fraction),
        (m.non_viewer_editor_fraction, expected.non_viewer_editor_fraction),
        (m.incorporation_rate, expected.incorporation_rate),
    ] {
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

/// Scenario edits, named as in the expected table.
fn adopted() -> String {
    MARS_WEIGHT.replace("weight_str", "weight_float").replace("z = ", "scaled_weight = ").replace("str(z)", "str(scaled_weight)")
        .replace("s = ", "scaled_weight_str = ").replace("+ s)", "+ scaled_weight_str)")
}

fn own_names(base: &str) -> String {
    base.replace("z = ", "mars_weight = ").replace("str(z)", "str(mars_weight)").replace("s = ", "message = ").replace("+ s)", "+ message)")
}

fn functional(base: &str) -> String {
    format!("{}\nprint(\"done\")\n", base.replace("0.378", "0.38"))
}

fn combined(base: &str) -> String {
    base.replace("z = ", "scaled_weight = ").replace("str(z)", "str(scaled_weight)").replace("0.378", "0.38")
}

fn constant(base: &str) -> String {
    format!("MARS_RATIO = 0.378\n\n{}", base.replace("* 0.378", "* MARS_RATIO"))
}

fn comment_added(base: &str) -> String {
    base.replace("    weight_str = float(weight)", "    # convert to float\n    weight_str = float(weight)")
}

fn whitespace(base: &str) -> String {
    base.replace("weight_str * 0.378", "weight_str*0.378")
}

fn tiny(base: &str) -> String {
    base.replace("0.378", "0.38")
}

const BROKEN: &str = "def main(:\n    weight = input()\n";

enum Step {
    Request(String, bool),
    Snap(String, bool),
    View,
}

/// Regenerates the event log. Run with `--ignored` after changing a scenario
/// and re-derive the expected table by hand.
#[test]
#[ignore]
fn generate_twenty_trace_fixture() {
    use Step::*;
    let f = MARS_WEIGHT.to_string();
    let scenarios: Vec<Vec<Step>> = vec![
        vec![Request(f.clone(), true), View, Snap(adopted(), true)],
        vec![Request(f.clone(), true), View, Snap(own_names(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View, Snap(functional(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View, Snap(combined(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View, Snap(constant(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View, Snap(comment_added(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View, Snap(whitespace(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), View],
        vec![Request(f.clone(), true), View, Snap(adopted(), true), Snap(functional(&adopted()), true)],
        vec![Request(f.clone(), true), View, Snap(tiny(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true), Snap(adopted(), true)],
        vec![Request(f.clone(), true), Snap(functional(MARS_WEIGHT), true)],
        vec![Request(f.clone(), true)],
        vec![Snap(tiny(MARS_WEIGHT), false), Snap(f.clone(), true)],
        vec![Request(BROKEN.into(), false), Snap(f.clone(), true), Snap(own_names(MARS_WEIGHT), true)],
        vec![Snap(f.clone(), false), Snap(adopted(), false)],
        vec![Request(f.clone(), true), View, Snap(own_names(MARS_WEIGHT), true), Snap(constant(&own_names(MARS_WEIGHT)), true)],
        vec![Request(f.clone(), true), Snap(adopted(), true), View],
        vec![Request(f.clone(), true), Snap(whitespace(MARS_WEIGHT), true), Snap(combined(&whitespace(MARS_WEIGHT)), true)],
        vec![Request(f.clone(), true), View, Snap(BROKEN.into(), false), Snap(adopted(), true)],
    ];
    let path = fixture("traces20.jsonl");
    let _ = std::fs::remove_file(&path);
    let engine = FeedbackEngine::new(FeedbackConfig::default(), PromptTemplates::default(), Arc::new(MockTransport::new()));
    let settings = ServiceSettings { weights: GroupWeights::new(0.0, 1.0, 0.0).unwrap(), ..ServiceSettings::default() };
    let (svc, _) = SessionService::with_log(settings, engine, &path).unwrap();
    let start: DateTime<Utc> = "2026-03-02T09:00:00Z".parse().unwrap();
    for (i, steps) in scenarios.into_iter().enumerate() {
        let student = format!("t{:02}", i + 1);
        let mut last_report: Option<ReportId> = None;
        for (k, step) in steps.into_iter().enumerate() {
            let now = start + Duration::hours(i as i64) + Duration::minutes(5 * k as i64);
            match step {
                Request(src, passed) => {
                    if let Ok(acc) = svc.request_style_feedback(&student, "mars", &src, passed, now) {
                        last_report = Some(acc.report_id);
                    }
                }
                Snap(src, passed) => svc.record_snapshot(&student, "mars", &src, passed, now).unwrap(),
                View => svc.record_view(last_report.as_ref().expect("a report to view"), Some(&student), now).unwrap(),
            }
        }
    }
}
