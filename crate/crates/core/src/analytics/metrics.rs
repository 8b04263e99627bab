use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::classify::{classify_edit_with, EditConfig, EditLabel, Incorporation};
use crate::report::StudentReport;
use crate::service::{Event, ReportId, SessionKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSnapshot {
    pub at: DateTime<Utc>,
    pub source: String,
    pub tests_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewedReport {
    pub at: DateTime<Utc>,
    pub report: StudentReport,
}

/// One student's work on one problem. Snapshots are strictly increasing in time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotTrace {
    pub student_id: String,
    pub problem_id: String,
    pub snapshots: Vec<CodeSnapshot>,
    #[serde(default)]
    pub reports_viewed: Vec<ViewedReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub at: DateTime<Utc>,
    pub label: EditLabel,
    pub incorporation: Vec<Incorporation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub student_id: String,
    pub problem_id: String,
    pub viewer: bool,
    pub reached_functionality: bool,
    /// Significant edits after the first passing snapshot.
    pub edits: Vec<EditRecord>,
    /// None for non-editors.
    pub label: Option<EditLabel>,
    pub incorporated: bool,
}

impl TraceSummary {
    pub fn editor(&self) -> bool {
        !self.edits.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub traces: usize,
    pub viewers: usize,
    pub non_viewers: usize,
    pub viewer_editors: usize,
    pub non_viewer_editors: usize,
    pub viewer_editor_fraction: f64,
    pub non_viewer_editor_fraction: f64,
    /// Trace labels of all editors.
    pub label_counts: BTreeMap<EditLabel, usize>,
    /// Viewers whose edits include a style or combined edit.
    pub style_editors: usize,
    pub incorporating_editors: usize,
    pub incorporation_rate: f64,
    /// Sorted by (student, problem).
    pub per_trace: Vec<TraceSummary>,
}

fn fraction(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn summarize_trace(config: &EditConfig, trace: &SnapshotTrace) -> TraceSummary {
    let viewer = !trace.reports_viewed.is_empty();
    let start = trace.snapshots.iter().position(|s| s.tests_passed);
    let mut edits = Vec::new();
    if let Some(start) = start {
        for pair in trace.snapshots[start..].windows(2) {
            let (before, after) = (&pair[0], &pair[1]);
            let viewed: Vec<StudentReport> =
                trace.reports_viewed.iter().filter(|v| v.at <= after.at).map(|v| v.report.clone()).collect();
            let c = classify_edit_with(config, &before.source, &after.source, &viewed);
            if c.significant && c.label != EditLabel::None {
                edits.push(EditRecord { at: after.at, label: c.label, incorporation: c.incorporation });
            }
        }
    }
    let has = |l: EditLabel| edits.iter().any(|e| e.label == l);
    let label = if edits.is_empty() {
        None
    } else if has(EditLabel::Combined) || (has(EditLabel::Style) && has(EditLabel::Functionality)) {
        Some(EditLabel::Combined)
    } else if has(EditLabel::Style) {
        Some(EditLabel::Style)
    } else {
        Some(EditLabel::Functionality)
    };
    let incorporated = edits.iter().any(|e| !e.incorporation.is_empty());
    TraceSummary {
        student_id: trace.student_id.clone(),
        problem_id: trace.problem_id.clone(),
        viewer,
        reached_functionality: start.is_some(),
        edits,
        label,
        incorporated,
    }
}

pub fn trace_metrics(traces: &[SnapshotTrace]) -> MetricsSummary {
    trace_metrics_with(&EditConfig::default(), traces)
}

pub fn trace_metrics_with(config: &EditConfig, traces: &[SnapshotTrace]) -> MetricsSummary {
    let mut per_trace: Vec<TraceSummary> = traces.iter().map(|t| summarize_trace(config, t)).collect();
    per_trace.sort_by(|a, b| (&a.student_id, &a.problem_id).cmp(&(&b.student_id, &b.problem_id)));

    let mut m = MetricsSummary { traces: per_trace.len(), ..MetricsSummary::default() };
    for t in &per_trace {
        if t.viewer {
            m.viewers += 1;
        } else {
            m.non_viewers += 1;
        }
        let Some(label) = t.label else { continue };
        *m.label_counts.entry(label).or_default() += 1;
        if t.viewer {
            m.viewer_editors += 1;
            if label.is_style() {
                m.style_editors += 1;
                m.incorporating_editors += usize::from(t.incorporated);
            }
        } else {
            m.non_viewer_editors += 1;
        }
    }
    m.viewer_editor_fraction = fraction(m.viewer_editors, m.viewers);
    m.non_viewer_editor_fraction = fraction(m.non_viewer_editors, m.non_viewers);
    m.incorporation_rate = fraction(m.incorporating_editors, m.style_editors);
    m.per_trace = per_trace;
    m
}

/// Builds traces from a session event log. Requests and IDE snapshots both
/// count as snapshots; a later entry at the same instant replaces an earlier one.
pub fn traces_from_events(events: &[Event]) -> Vec<SnapshotTrace> {
    let mut snaps: BTreeMap<SessionKey, Vec<CodeSnapshot>> = BTreeMap::new();
    let mut views: BTreeMap<SessionKey, Vec<ViewedReport>> = BTreeMap::new();
    let mut reports: BTreeMap<ReportId, StudentReport> = BTreeMap::new();
    let mut ordered: Vec<&Event> = events.iter().collect();
    ordered.sort_by_key(|e| e.at());
    for e in ordered {
        let (source, tests_passed) = match e {
            Event::FeedbackAccepted { source, report_id, report, .. } => {
                reports.insert(report_id.clone(), report.student_view());
                (source, true)
            }
            Event::FeedbackRejected { source, tests_passed, .. } | Event::Snapshot { source, tests_passed, .. } => {
                (source, *tests_passed)
            }
            Event::ReportViewed { key, report_id, at } => {
                if let Some(report) = reports.get(report_id) {
                    views.entry(key.clone()).or_default().push(ViewedReport { at: *at, report: report.clone() });
                }
                continue;
            }
            Event::SessionOpened { .. } | Event::ReportRated { .. } => continue,
        };
        let list = snaps.entry(e.key().clone()).or_default();
        let snap = CodeSnapshot { at: e.at(), source: source.clone(), tests_passed };
        match list.last_mut() {
            Some(last) if last.at == snap.at => *last = snap,
            _ => list.push(snap),
        }
    }
    snaps
        .into_iter()
        .map(|(key, snapshots)| SnapshotTrace {
            reports_viewed: views.remove(&key).unwrap_or_default(),
            student_id: key.student_id,
            problem_id: key.problem_id,
            snapshots,
        })
        .collect()
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

/// Plain-text table of the summary.
pub fn render_metrics_table(m: &MetricsSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<34} {:>8} {:>8} {:>8}", "group", "traces", "editors", "fraction");
    let _ = writeln!(out, "{:<34} {:>8} {:>8} {:>8}", "viewed feedback", m.viewers, m.viewer_editors, pct(m.viewer_editor_fraction));
    let _ = writeln!(
        out,
        "{:<34} {:>8} {:>8} {:>8}",
        "did not view feedback",
        m.non_viewers,
        m.non_viewer_editors,
        pct(m.non_viewer_editor_fraction)
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "editor labels");
    for label in [EditLabel::Style, EditLabel::Functionality, EditLabel::Combined] {
        let _ = writeln!(out, "  {:<32} {:>8}", label.as_str(), m.label_counts.get(&label).copied().unwrap_or(0));
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "incorporation among viewing style editors: {}/{} ({})",
        m.incorporating_editors,
        m.style_editors,
        pct(m.incorporation_rate)
    );
    out
}
