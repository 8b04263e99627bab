//! Append-only JSON-lines event log. One object per line with the keys
//! `event_type`, `ids`, `payload`, `timestamps`; every nested object has its
//! keys in sorted order so equal events serialize to equal bytes.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::groups::Group;
use super::{ReportId, SessionKey};
use crate::report::FeedbackReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    GateClosed,
    CooldownActive { remaining_seconds: u64 },
    SyntaxError { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    SessionOpened {
        key: SessionKey,
        group: Group,
        at: DateTime<Utc>,
    },
    FeedbackAccepted {
        key: SessionKey,
        report_id: ReportId,
        source: String,
        report: Box<FeedbackReport>,
        at: DateTime<Utc>,
        visible_from: DateTime<Utc>,
    },
    FeedbackRejected {
        key: SessionKey,
        reason: RejectReason,
        source: String,
        tests_passed: bool,
        at: DateTime<Utc>,
    },
    /// A code snapshot reported by the host IDE outside any feedback request.
    Snapshot {
        key: SessionKey,
        source: String,
        tests_passed: bool,
        at: DateTime<Utc>,
    },
    ReportViewed {
        key: SessionKey,
        report_id: ReportId,
        at: DateTime<Utc>,
    },
    ReportRated {
        key: SessionKey,
        report_id: ReportId,
        helpful: bool,
        at: DateTime<Utc>,
    },
}

impl Event {
    pub fn key(&self) -> &SessionKey {
        match self {
            Event::SessionOpened { key, .. }
            | Event::FeedbackAccepted { key, .. }
            | Event::FeedbackRejected { key, .. }
            | Event::Snapshot { key, .. }
            | Event::ReportViewed { key, .. }
            | Event::ReportRated { key, .. } => key,
        }
    }

    pub fn at(&self) -> DateTime<Utc> {
        match self {
            Event::SessionOpened { at, .. }
            | Event::FeedbackAccepted { at, .. }
            | Event::FeedbackRejected { at, .. }
            | Event::Snapshot { at, .. }
            | Event::ReportViewed { at, .. }
            | Event::ReportRated { at, .. } => *at,
        }
    }

    pub fn event_type(&self) -> &'static str {
        match self {
            Event::SessionOpened { .. } => "session_opened",
            Event::FeedbackAccepted { .. } => "feedback_accepted",
            Event::FeedbackRejected { .. } => "feedback_rejected",
            Event::Snapshot { .. } => "snapshot",
            Event::ReportViewed { .. } => "report_viewed",
            Event::ReportRated { .. } => "report_rated",
        }
    }

    pub fn to_line(&self) -> LogLine {
        let mut ids = BTreeMap::from([
            ("problem_id".to_string(), self.key().problem_id.clone()),
            ("student_id".to_string(), self.key().student_id.clone()),
        ]);
        let mut timestamps = BTreeMap::from([("at".to_string(), self.at())]);
        let payload = match self {
            Event::SessionOpened { group, .. } => to_map(&OpenedPayload { group: *group }),
            Event::FeedbackAccepted { report_id, source, report, visible_from, .. } => {
                ids.insert("report_id".into(), report_id.0.clone());
                timestamps.insert("visible_from".into(), *visible_from);
                to_map(&AcceptedPayload { report: report.as_ref().clone(), source: source.clone() })
            }
            Event::FeedbackRejected { reason, source, tests_passed, .. } => to_map(&RejectedPayload {
                reason: reason.clone(),
                source: source.clone(),
                tests_passed: *tests_passed,
            }),
            Event::Snapshot { source, tests_passed, .. } => {
                to_map(&SnapshotPayload { source: source.clone(), tests_passed: *tests_passed })
            }
            Event::ReportViewed { report_id, .. } => {
                ids.insert("report_id".into(), report_id.0.clone());
                Map::new()
            }
            Event::ReportRated { report_id, helpful, .. } => {
                ids.insert("report_id".into(), report_id.0.clone());
                to_map(&RatedPayload { helpful: *helpful })
            }
        };
        LogLine { event_type: self.event_type().to_string(), ids, payload, timestamps }
    }

    pub fn from_line(line: &LogLine) -> Result<Self, String> {
        let id = |k: &str| line.ids.get(k).cloned().ok_or_else(|| format!("missing ids.{k}"));
        let ts = |k: &str| line.timestamps.get(k).copied().ok_or_else(|| format!("missing timestamps.{k}"));
        let key = SessionKey { student_id: id("student_id")?, problem_id: id("problem_id")? };
        let at = ts("at")?;
        Ok(match line.event_type.as_str() {
            "session_opened" => {
                let p: OpenedPayload = from_map(&line.payload)?;
                Event::SessionOpened { key, group: p.group, at }
            }
            "feedback_accepted" => {
                let p: AcceptedPayload = from_map(&line.payload)?;
                Event::FeedbackAccepted {
                    key,
                    report_id: ReportId(id("report_id")?),
                    source: p.source,
                    report: Box::new(p.report),
                    at,
                    visible_from: ts("visible_from")?,
                }
            }
            "feedback_rejected" => {
                let p: RejectedPayload = from_map(&line.payload)?;
                Event::FeedbackRejected { key, reason: p.reason, source: p.source, tests_passed: p.tests_passed, at }
            }
            "snapshot" => {
                let p: SnapshotPayload = from_map(&line.payload)?;
                Event::Snapshot { key, source: p.source, tests_passed: p.tests_passed, at }
            }
            "report_viewed" => Event::ReportViewed { key, report_id: ReportId(id("report_id")?), at },
            "report_rated" => {
                let p: RatedPayload = from_map(&line.payload)?;
                Event::ReportRated { key, report_id: ReportId(id("report_id")?), helpful: p.helpful, at }
            }
            other => return Err(format!("unknown event_type {other:?}")),
        })
    }

    /// One log line, without the trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_line()).expect("event serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let line: LogLine = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_line(&line)
    }
}

/// Wire form of one event. Field order is alphabetical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub event_type: String,
    pub ids: BTreeMap<String, String>,
    pub payload: Map<String, Value>,
    pub timestamps: BTreeMap<String, DateTime<Utc>>,
}

#[derive(Serialize, Deserialize)]
struct OpenedPayload {
    group: Group,
}

#[derive(Serialize, Deserialize)]
struct AcceptedPayload {
    report: FeedbackReport,
    source: String,
}

#[derive(Serialize, Deserialize)]
struct RejectedPayload {
    reason: RejectReason,
    source: String,
    tests_passed: bool,
}

#[derive(Serialize, Deserialize)]
struct SnapshotPayload {
    source: String,
    tests_passed: bool,
}

#[derive(Serialize, Deserialize)]
struct RatedPayload {
    helpful: bool,
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    // serde_json maps are sorted by key, which gives the stable ordering.
    match serde_json::to_value(v).expect("payload serializes") {
        Value::Object(m) => m,
        _ => unreachable!("payloads are structs"),
    }
}

fn from_map<T: DeserializeOwned>(m: &Map<String, Value>) -> Result<T, String> {
    serde_json::from_value(Value::Object(m.clone())).map_err(|e| format!("bad payload: {e}"))
}

/// A skipped log line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogWarning {
    pub line_no: usize,
    pub message: String,
}

impl std::fmt::Display for LogWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line_no, self.message)
    }
}

/// Parses every well-formed line; blank lines are ignored, broken ones reported.
pub fn parse_events(text: &str) -> (Vec<Event>, Vec<LogWarning>) {
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match Event::from_json(line) {
            Ok(e) => events.push(e),
            Err(message) => warnings.push(LogWarning { line_no: i + 1, message }),
        }
    }
    (events, warnings)
}

pub fn read_events(path: &Path) -> io::Result<(Vec<Event>, Vec<LogWarning>)> {
    Ok(parse_events(&std::fs::read_to_string(path)?))
}

/// Durable appender: every event is synced to disk before `append` returns.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Opens or creates the log and returns the events already in it.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<(Self, Vec<Event>, Vec<LogWarning>)> {
        let path = path.into();
        let mut file = OpenOptions::new().create(true).read(true).append(true).open(&path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        if !text.is_empty() && !text.ends_with('\n') {
            // A torn final line must not swallow the next event.
            file.seek(SeekFrom::End(0))?;
            file.write_all(b"\n")?;
            file.sync_data()?;
        }
        let (events, warnings) = parse_events(&text);
        Ok((Self { path, file }, events, warnings))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &Event) -> io::Result<()> {
        let mut line = event.to_json();
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()
    }
}
