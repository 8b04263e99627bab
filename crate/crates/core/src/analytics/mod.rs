//! Offline analysis of student edit traces: which post-functionality edits
//! were about style, and whether viewed feedback was acted on.

mod canon;
mod classify;
mod metrics;
#[cfg(test)]
mod tests;

pub use canon::{canonicalize, CanonicalForm};
pub use classify::{
    classify_edit, classify_edit_with, normalized_tokens, token_distance, EditClassification, EditConfig, EditLabel,
    Incorporation, IncorporationKind, StyleChange,
};
pub use metrics::{
    render_metrics_table, summarize_trace, trace_metrics, trace_metrics_with, traces_from_events, CodeSnapshot,
    EditRecord, MetricsSummary, SnapshotTrace, TraceSummary, ViewedReport,
};
