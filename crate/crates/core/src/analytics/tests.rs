use chrono::{DateTime, Duration, Utc};

use super::*;
use crate::frontend::tests::MARS_WEIGHT;
use crate::llm::{FaultMode, MockTransport, PromptTemplates};
use crate::pipeline::{FeedbackConfig, FeedbackEngine};
use crate::report::StudentReport;
use crate::service::{Group, GroupWeights, ServiceSettings, SessionService};
use std::sync::Arc;

fn t0() -> DateTime<Utc> {
    "2026-03-04T10:00:00Z".parse().unwrap()
}

fn engine() -> FeedbackEngine {
    FeedbackEngine::new(FeedbackConfig::default(), PromptTemplates::default(), Arc::new(MockTransport::with_fault(FaultMode::None)))
}

fn mock_report() -> StudentReport {
    engine().generate(&crate::frontend::SourceProgram::new("mars", MARS_WEIGHT).unwrap(), t0()).unwrap().student_view()
}

fn snap(min: i64, source: &str, tests_passed: bool) -> CodeSnapshot {
    CodeSnapshot { at: t0() + Duration::minutes(min), source: source.into(), tests_passed }
}

/// The reference program with the mock's suggested names applied.
fn adopted() -> String {
    MARS_WEIGHT.replace("weight_str", "weight_float").replace("z = ", "scaled_weight = ").replace("str(z)", "str(scaled_weight)")
}

fn trace(student: &str, snapshots: Vec<CodeSnapshot>, viewed: bool) -> SnapshotTrace {
    SnapshotTrace {
        student_id: student.into(),
        problem_id: "mars".into(),
        snapshots,
        reports_viewed: if viewed { vec![ViewedReport { at: t0(), report: mock_report() }] } else { vec![] },
    }
}

#[test]
fn every_viewer_adopting_a_name_gives_full_incorporation() {
    let traces: Vec<_> = (0..4)
        .map(|i| trace(&format!("s{i}"), vec![snap(0, MARS_WEIGHT, true), snap(5, &adopted(), true)], true))
        .collect();
    let m = trace_metrics(&traces);
    assert_eq!((m.viewers, m.viewer_editors, m.style_editors, m.incorporating_editors), (4, 4, 4, 4));
    assert_eq!(m.incorporation_rate, 1.0);
    assert_eq!(m.label_counts.get(&EditLabel::Style), Some(&4));
}

#[test]
fn no_post_functionality_snapshots_means_no_editors() {
    let traces = vec![
        trace("a", vec![snap(0, MARS_WEIGHT, false), snap(1, &adopted(), false)], true),
        trace("b", vec![snap(0, MARS_WEIGHT, true)], false),
    ];
    let m = trace_metrics(&traces);
    assert_eq!((m.viewer_editor_fraction, m.non_viewer_editor_fraction), (0.0, 0.0));
    assert_eq!(m.incorporation_rate, 0.0);
    assert_eq!(trace_metrics(&[]), MetricsSummary::default());
}

#[test]
fn edits_before_functionality_are_ignored_and_views_are_time_gated() {
    let mut tr = trace("a", vec![snap(0, MARS_WEIGHT, false), snap(1, MARS_WEIGHT, true), snap(9, &adopted(), true)], false);
    tr.reports_viewed.push(ViewedReport { at: t0() + Duration::minutes(10), report: mock_report() });
    let s = summarize_trace(&EditConfig::default(), &tr);
    assert_eq!(s.edits.len(), 1);
    assert!(s.viewer);
    assert!(!s.incorporated, "report viewed after the edit");
}

#[test]
fn mixed_style_and_functionality_edits_make_a_combined_trace() {
    let numeric = adopted().replace("0.378", "0.3794");
    let longer = format!("{numeric}\nprint(\"done\", 1, 2)\n");
    let tr = trace("a", vec![snap(0, MARS_WEIGHT, true), snap(1, &adopted(), true), snap(2, &longer, true)], false);
    let s = summarize_trace(&EditConfig::default(), &tr);
    let labels: Vec<_> = s.edits.iter().map(|e| e.label).collect();
    assert_eq!(labels, [EditLabel::Style, EditLabel::Functionality]);
    assert_eq!(s.label, Some(EditLabel::Combined));
}

#[test]
fn traces_from_service_events() {
    let weights = GroupWeights::new(0.0, 1.0, 0.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let (svc, _) = SessionService::with_log(ServiceSettings { weights, ..ServiceSettings::default() }, engine(), &path).unwrap();
    assert_eq!(svc.session(&crate::service::SessionKey::new("s", "mars")), None);
    let _ = svc.request_style_feedback("s", "mars", MARS_WEIGHT, false, t0());
    let acc = svc.request_style_feedback("s", "mars", MARS_WEIGHT, true, t0() + Duration::minutes(1)).unwrap();
    assert_eq!(acc.group, Group::RealTime);
    svc.record_view(&acc.report_id, None, t0() + Duration::minutes(2)).unwrap();
    svc.record_snapshot("s", "mars", &adopted(), true, t0() + Duration::minutes(3)).unwrap();
    // Same instant as the previous snapshot: replaces it.
    svc.record_snapshot("s", "mars", &adopted(), true, t0() + Duration::minutes(3)).unwrap();
    let traces = traces_from_events(&crate::service::read_events(&path).unwrap().0);
    assert_eq!(traces.len(), 1);
    assert_eq!(traces[0].snapshots.len(), 3);
    assert_eq!(traces[0].reports_viewed.len(), 1);
    let m = trace_metrics(&traces);
    assert_eq!((m.viewer_editors, m.incorporating_editors), (1, 1));
}

#[test]
fn table_renders_fractions() {
    let traces = vec![trace("a", vec![snap(0, MARS_WEIGHT, true), snap(5, &adopted(), true)], true)];
    let table = render_metrics_table(&trace_metrics(&traces));
    assert!(table.contains("viewed feedback"));
    assert!(table.contains("1/1 (100.0%)"));
}
