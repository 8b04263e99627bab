//! Feedback sessions: functionality gate, per-problem cooldown, experiment
//! groups, delayed release, views and ratings, backed by a replayable event log.

mod clock;
mod config;
mod events;
mod groups;
mod http;
mod release;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{SourceProgram, SyntaxError};
use crate::pipeline::FeedbackEngine;
use crate::report::{FeedbackReport, StudentReport};

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ConfigError, ServiceConfig, TransportKind};
pub use events::{parse_events, read_events, Event, EventLog, LogLine, LogWarning, RejectReason};
pub use groups::{assign_group, unit_hash, Group, GroupWeights, InvalidWeights};
pub use http::router;
pub use release::{ReleaseSchedule, ReleaseScheduleConfig, ScheduleError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionKey {
    pub student_id: String,
    pub problem_id: String,
}

impl SessionKey {
    pub fn new(student_id: impl Into<String>, problem_id: impl Into<String>) -> Self {
        Self { student_id: student_id.into(), problem_id: problem_id.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReportId(pub String);

impl std::fmt::Display for ReportId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// A generated report; `visible_from >= report.generated_at`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredReport {
    pub report_id: ReportId,
    pub report: FeedbackReport,
    pub visible_from: DateTime<Utc>,
    pub views: Vec<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub report_id: ReportId,
    pub helpful: bool,
    pub rated_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub student_id: String,
    pub problem_id: String,
    /// Fixed when the session is opened.
    pub group: Group,
    /// Latest attestation from the host platform.
    pub tests_passed: bool,
    /// Time of the latest accepted request; never decreases.
    pub last_request_at: Option<DateTime<Utc>>,
    pub stored_reports: Vec<StoredReport>,
    /// At most one rating per report.
    pub ratings: Vec<RatingRecord>,
}

/// Materialized view of the event log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceState {
    pub sessions: BTreeMap<SessionKey, SessionRecord>,
    pub reports: BTreeMap<ReportId, SessionKey>,
}

impl ServiceState {
    /// Rebuilds state from events in log order.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, String> {
        let mut s = Self::default();
        for e in events {
            s.apply(e)?;
        }
        Ok(s)
    }

    fn record_mut(&mut self, key: &SessionKey) -> Result<&mut SessionRecord, String> {
        self.sessions
            .get_mut(key)
            .ok_or_else(|| format!("event for unopened session {}/{}", key.student_id, key.problem_id))
    }

    fn stored_mut<'a>(rec: &'a mut SessionRecord, id: &ReportId) -> Result<&'a mut StoredReport, String> {
        rec.stored_reports.iter_mut().find(|r| &r.report_id == id).ok_or_else(|| format!("unknown report {id}"))
    }

    /// The single state transition used both live and during replay.
    pub fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::SessionOpened { key, group, .. } => {
                if self.sessions.contains_key(key) {
                    return Err(format!("session {}/{} opened twice", key.student_id, key.problem_id));
                }
                self.sessions.insert(
                    key.clone(),
                    SessionRecord {
                        student_id: key.student_id.clone(),
                        problem_id: key.problem_id.clone(),
                        group: *group,
                        tests_passed: false,
                        last_request_at: None,
                        stored_reports: Vec::new(),
                        ratings: Vec::new(),
                    },
                );
            }
            Event::FeedbackAccepted { key, report_id, report, at, visible_from, .. } => {
                if self.reports.contains_key(report_id) {
                    return Err(format!("duplicate report id {report_id}"));
                }
                let rec = self.record_mut(key)?;
                rec.tests_passed = true;
                rec.last_request_at = Some(rec.last_request_at.map_or(*at, |t| t.max(*at)));
                rec.stored_reports.push(StoredReport {
                    report_id: report_id.clone(),
                    report: report.as_ref().clone(),
                    visible_from: *visible_from,
                    views: Vec::new(),
                });
                self.reports.insert(report_id.clone(), key.clone());
            }
            Event::FeedbackRejected { key, tests_passed, .. } | Event::Snapshot { key, tests_passed, .. } => {
                self.record_mut(key)?.tests_passed = *tests_passed;
            }
            Event::ReportViewed { key, report_id, at } => {
                let rec = self.record_mut(key)?;
                Self::stored_mut(rec, report_id)?.views.push(*at);
            }
            Event::ReportRated { key, report_id, helpful, at } => {
                let rec = self.record_mut(key)?;
                Self::stored_mut(rec, report_id)?;
                match rec.ratings.iter_mut().find(|r| &r.report_id == report_id) {
                    Some(r) => {
                        r.helpful = *helpful;
                        r.rated_at = *at;
                    }
                    None => rec.ratings.push(RatingRecord { report_id: report_id.clone(), helpful: *helpful, rated_at: *at }),
                }
            }
        }
        Ok(())
    }

    fn next_report_id(&self) -> ReportId {
        ReportId(format!("rpt-{:06}", self.reports.len() + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("source is empty")]
    EmptySource,
    #[error("style feedback unlocks after all functionality tests pass")]
    GateClosed,
    #[error("feedback was requested recently; try again in {remaining_seconds} s")]
    CooldownActive { remaining_seconds: u64 },
    #[error("{0}")]
    Syntax(SyntaxError),
    #[error("unknown session")]
    UnknownSession,
    #[error("unknown report")]
    UnknownReport,
    #[error("report is not visible until {visible_from}")]
    NotVisible { visible_from: DateTime<Utc> },
    #[error("event log write failed: {0}")]
    Storage(String),
    #[error("feedback pipeline failed: {0}")]
    Pipeline(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSettings {
    pub weights: GroupWeights,
    pub seed: u64,
    pub cooldown: Duration,
    pub release: ReleaseSchedule,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            weights: GroupWeights::default(),
            seed: 0,
            cooldown: Duration::seconds(600),
            release: ReleaseSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptedRequest {
    pub report_id: ReportId,
    pub group: Group,
    pub visible_from: DateTime<Utc>,
    pub visible_now: bool,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleReport {
    pub report_id: ReportId,
    pub visible_from: DateTime<Utc>,
    pub viewed: bool,
    pub rating: Option<bool>,
    pub report: StudentReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleReports {
    pub student_id: String,
    pub problem_id: String,
    pub group: Group,
    /// Set for nudge-group sessions while a visible report is unviewed.
    pub nudge: bool,
    pub tests_passed: bool,
    pub cooldown_remaining_seconds: u64,
    /// Stored reports not yet released.
    pub pending: usize,
    pub next_release: Option<DateTime<Utc>>,
    /// Newest first.
    pub reports: Vec<VisibleReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingsSummary {
    pub helpful: usize,
    pub not_helpful: usize,
}

pub struct SessionService {
    settings: ServiceSettings,
    engine: FeedbackEngine,
    state: RwLock<ServiceState>,
    /// Only touched while `state` is write-locked, so log order is apply order.
    log: Mutex<Option<EventLog>>,
    key_locks: Mutex<HashMap<SessionKey, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for SessionService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionService").field("settings", &self.settings).finish_non_exhaustive()
    }
}

fn ceil_seconds(d: Duration) -> u64 {
    let ms = d.num_milliseconds().max(0) as u64;
    ms.div_ceil(1000)
}

impl SessionService {
    pub fn in_memory(settings: ServiceSettings, engine: FeedbackEngine) -> Self {
        Self {
            settings,
            engine,
            state: RwLock::new(ServiceState::default()),
            log: Mutex::new(None),
            key_locks: Mutex::new(HashMap::new()),
        }
    }

    /// Opens the log at `path`, replays it, and appends to it from then on.
    /// Unparseable lines are skipped and returned as warnings.
    pub fn with_log(
        settings: ServiceSettings,
        engine: FeedbackEngine,
        path: &Path,
    ) -> Result<(Self, Vec<LogWarning>), ServiceError> {
        let (log, events, mut warnings) = EventLog::open(path).map_err(|e| ServiceError::Storage(e.to_string()))?;
        let mut state = ServiceState::default();
        for (i, e) in events.iter().enumerate() {
            if let Err(message) = state.apply(e) {
                warnings.push(LogWarning { line_no: i + 1, message });
            }
        }
        for w in &warnings {
            tracing::warn!(%w, "skipping event log entry");
        }
        let svc = Self {
            settings,
            engine,
            state: RwLock::new(state),
            log: Mutex::new(Some(log)),
            key_locks: Mutex::new(HashMap::new()),
        };
        Ok((svc, warnings))
    }

    pub fn settings(&self) -> &ServiceSettings {
        &self.settings
    }

    /// Consistent copy of the materialized state.
    pub fn state(&self) -> ServiceState {
        self.state.read().expect("state lock").clone()
    }

    pub fn session(&self, key: &SessionKey) -> Option<SessionRecord> {
        self.state.read().expect("state lock").sessions.get(key).cloned()
    }

    fn key_lock(&self, key: &SessionKey) -> Arc<Mutex<()>> {
        self.key_locks.lock().expect("key locks").entry(key.clone()).or_default().clone()
    }

    /// Appends the events built from the current state, then applies them.
    fn commit<T>(&self, build: impl FnOnce(&ServiceState) -> (Vec<Event>, T)) -> Result<T, ServiceError> {
        let mut state = self.state.write().expect("state lock");
        let (events, out) = build(&state);
        let mut log = self.log.lock().expect("log lock");
        for e in &events {
            if let Some(log) = log.as_mut() {
                log.append(e).map_err(|err| ServiceError::Storage(err.to_string()))?;
            }
            state.apply(e).map_err(ServiceError::Pipeline)?;
        }
        Ok(out)
    }

    fn ensure_session(&self, key: &SessionKey, now: DateTime<Utc>) -> Result<SessionRecord, ServiceError> {
        if let Some(rec) = self.session(key) {
            return Ok(rec);
        }
        let group = assign_group(&key.student_id, &self.settings.weights, self.settings.seed)
            .map_err(|e| ServiceError::Pipeline(e.to_string()))?;
        self.commit(|s| {
            let events = if s.sessions.contains_key(key) {
                Vec::new()
            } else {
                vec![Event::SessionOpened { key: key.clone(), group, at: now }]
            };
            (events, ())
        })?;
        self.session(key).ok_or(ServiceError::UnknownSession)
    }

    fn cooldown_remaining(&self, rec: &SessionRecord, now: DateTime<Utc>) -> Option<u64> {
        let last = rec.last_request_at?;
        let elapsed = now - last;
        (elapsed < self.settings.cooldown).then(|| ceil_seconds(self.settings.cooldown - elapsed).max(1))
    }

    pub fn request_style_feedback(
        &self,
        student_id: &str,
        problem_id: &str,
        source: &str,
        tests_passed: bool,
        now: DateTime<Utc>,
    ) -> Result<AcceptedRequest, ServiceError> {
        let program = SourceProgram::new(problem_id, source).map_err(|_| ServiceError::EmptySource)?;
        let key = SessionKey::new(student_id, problem_id);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().expect("session lock");
        let rec = self.ensure_session(&key, now)?;

        let reject = |reason: RejectReason, err: ServiceError| -> Result<AcceptedRequest, ServiceError> {
            self.commit(|_| {
                (
                    vec![Event::FeedbackRejected {
                        key: key.clone(),
                        reason,
                        source: source.to_string(),
                        tests_passed,
                        at: now,
                    }],
                    (),
                )
            })?;
            Err(err)
        };

        if !tests_passed {
            return reject(RejectReason::GateClosed, ServiceError::GateClosed);
        }
        if let Some(remaining_seconds) = self.cooldown_remaining(&rec, now) {
            return reject(
                RejectReason::CooldownActive { remaining_seconds },
                ServiceError::CooldownActive { remaining_seconds },
            );
        }
        let report = match self.engine.generate(&program, now) {
            Ok(r) => r,
            Err(e) => {
                return reject(
                    RejectReason::SyntaxError { line: e.line, message: e.message.clone() },
                    ServiceError::Syntax(e),
                )
            }
        };
        let visible_from = if rec.group.sees_immediately() { now } else { self.settings.release.next_after(now) };
        let degraded = report.degraded;
        let group = rec.group;
        self.commit(|s| {
            let report_id = s.next_report_id();
            let event = Event::FeedbackAccepted {
                key: key.clone(),
                report_id: report_id.clone(),
                source: source.to_string(),
                report: Box::new(report),
                at: now,
                visible_from,
            };
            let out = AcceptedRequest { report_id, group, visible_from, visible_now: visible_from <= now, degraded };
            (vec![event], out)
        })
    }

    /// Records a code snapshot from the host IDE for later edit analysis.
    pub fn record_snapshot(
        &self,
        student_id: &str,
        problem_id: &str,
        source: &str,
        tests_passed: bool,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let key = SessionKey::new(student_id, problem_id);
        let lock = self.key_lock(&key);
        let _guard = lock.lock().expect("session lock");
        self.ensure_session(&key, now)?;
        self.commit(|_| {
            (vec![Event::Snapshot { key: key.clone(), source: source.to_string(), tests_passed, at: now }], ())
        })
    }

    pub fn get_visible_reports(
        &self,
        student_id: &str,
        problem_id: &str,
        now: DateTime<Utc>,
    ) -> Result<VisibleReports, ServiceError> {
        let key = SessionKey::new(student_id, problem_id);
        let rec = self.session(&key).ok_or(ServiceError::UnknownSession)?;
        let mut reports: Vec<VisibleReport> = rec
            .stored_reports
            .iter()
            .filter(|r| r.visible_from <= now)
            .map(|r| VisibleReport {
                report_id: r.report_id.clone(),
                visible_from: r.visible_from,
                viewed: !r.views.is_empty(),
                rating: rec.ratings.iter().find(|x| x.report_id == r.report_id).map(|x| x.helpful),
                report: r.report.student_view(),
            })
            .collect();
        reports.reverse();
        let pending: Vec<_> = rec.stored_reports.iter().filter(|r| r.visible_from > now).collect();
        Ok(VisibleReports {
            nudge: rec.group == Group::RealTimeWithNudge && reports.iter().any(|r| !r.viewed),
            cooldown_remaining_seconds: self.cooldown_remaining(&rec, now).unwrap_or(0),
            pending: pending.len(),
            next_release: pending.iter().map(|r| r.visible_from).min(),
            student_id: rec.student_id,
            problem_id: rec.problem_id,
            group: rec.group,
            tests_passed: rec.tests_passed,
            reports,
        })
    }

    /// Session owning a report, checked against the caller when given.
    fn visible_report(
        &self,
        report_id: &ReportId,
        student_id: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<SessionKey, ServiceError> {
        let state = self.state.read().expect("state lock");
        let key = state.reports.get(report_id).ok_or(ServiceError::UnknownReport)?;
        if student_id.is_some_and(|s| s != key.student_id) {
            return Err(ServiceError::UnknownReport);
        }
        let stored = state.sessions[key]
            .stored_reports
            .iter()
            .find(|r| &r.report_id == report_id)
            .ok_or(ServiceError::UnknownReport)?;
        if stored.visible_from > now {
            return Err(ServiceError::NotVisible { visible_from: stored.visible_from });
        }
        Ok(key.clone())
    }

    pub fn record_view(
        &self,
        report_id: &ReportId,
        student_id: Option<&str>,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let key = self.visible_report(report_id, student_id, now)?;
        self.commit(|_| (vec![Event::ReportViewed { key, report_id: report_id.clone(), at: now }], ()))
    }

    /// Later ratings of the same report overwrite earlier ones.
    pub fn record_rating(
        &self,
        report_id: &ReportId,
        student_id: Option<&str>,
        helpful: bool,
        now: DateTime<Utc>,
    ) -> Result<(), ServiceError> {
        let key = self.visible_report(report_id, student_id, now)?;
        self.commit(|_| (vec![Event::ReportRated { key, report_id: report_id.clone(), helpful, at: now }], ()))
    }

    pub fn ratings_summary(&self) -> RatingsSummary {
        let state = self.state.read().expect("state lock");
        let mut s = RatingsSummary::default();
        for r in state.sessions.values().flat_map(|rec| &rec.ratings) {
            if r.helpful {
                s.helpful += 1;
            } else {
                s.not_helpful += 1;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests;
