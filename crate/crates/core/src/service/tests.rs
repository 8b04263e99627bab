use super::*;
use crate::frontend::tests::MARS_WEIGHT;
use crate::llm::{FaultMode, MockTransport, PromptTemplates};
use crate::pipeline::FeedbackConfig;

fn t(s: &str) -> DateTime<Utc> {
    s.parse().unwrap()
}

fn engine(fault: FaultMode) -> FeedbackEngine {
    FeedbackEngine::new(FeedbackConfig::default(), PromptTemplates::default(), Arc::new(MockTransport::with_fault(fault)))
}

fn only(group: Group) -> ServiceSettings {
    let weights = match group {
        Group::Delay => GroupWeights::new(1.0, 0.0, 0.0),
        Group::RealTime => GroupWeights::new(0.0, 1.0, 0.0),
        Group::RealTimeWithNudge => GroupWeights::new(0.0, 0.0, 1.0),
    }
    .unwrap();
    ServiceSettings { weights, ..ServiceSettings::default() }
}

fn service(group: Group) -> SessionService {
    SessionService::in_memory(only(group), engine(FaultMode::None))
}

// 2026-03-04 is a Wednesday; the following Monday is 2026-03-09.
const WED: &str = "2026-03-04T10:00:00Z";

#[test]
fn realtime_report_visible_immediately() {
    let svc = service(Group::RealTime);
    let now = t(WED);
    let acc = svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, now).unwrap();
    assert!(acc.visible_now);
    assert_eq!(acc.visible_from, now);
    assert_eq!(acc.report_id, ReportId("rpt-000001".into()));
    let v = svc.get_visible_reports("s1", "mars", now).unwrap();
    assert_eq!(v.reports.len(), 1);
    assert!(!v.nudge, "real-time group is never nudged");
}

#[test]
fn gate_and_cooldown_boundaries() {
    let svc = service(Group::RealTime);
    let t0 = t(WED);
    assert_eq!(svc.request_style_feedback("s1", "mars", MARS_WEIGHT, false, t0), Err(ServiceError::GateClosed));
    svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, t0).unwrap();
    assert_eq!(
        svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, t0 + Duration::seconds(599)),
        Err(ServiceError::CooldownActive { remaining_seconds: 1 })
    );
    assert_eq!(
        svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, t0 + Duration::milliseconds(599_001)),
        Err(ServiceError::CooldownActive { remaining_seconds: 1 })
    );
    // A different problem has its own cooldown.
    svc.request_style_feedback("s1", "other", MARS_WEIGHT, true, t0 + Duration::seconds(10)).unwrap();
    svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, t0 + Duration::seconds(600)).unwrap();
    let rec = svc.session(&SessionKey::new("s1", "mars")).unwrap();
    assert_eq!(rec.stored_reports.len(), 2);
    assert_eq!(rec.last_request_at, Some(t0 + Duration::seconds(600)));
}

#[test]
fn rejected_requests_do_not_start_cooldown() {
    let svc = service(Group::RealTime);
    let t0 = t(WED);
    assert!(matches!(
        svc.request_style_feedback("s1", "p", "def main(:\n", true, t0),
        Err(ServiceError::Syntax(_))
    ));
    svc.request_style_feedback("s1", "p", MARS_WEIGHT, true, t0 + Duration::seconds(1)).unwrap();
    assert_eq!(svc.request_style_feedback("s1", "p", "", true, t0), Err(ServiceError::EmptySource));
}

#[test]
fn delay_group_waits_for_monday() {
    let svc = service(Group::Delay);
    let acc = svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, t(WED)).unwrap();
    assert_eq!(acc.visible_from, t("2026-03-09T00:00:00Z"));
    assert!(!acc.visible_now);
    let before = svc.get_visible_reports("s1", "mars", t("2026-03-08T23:59:59Z")).unwrap();
    assert!(before.reports.is_empty());
    assert_eq!((before.pending, before.next_release), (1, Some(acc.visible_from)));
    let after = svc.get_visible_reports("s1", "mars", t("2026-03-09T00:00:00Z")).unwrap();
    assert_eq!(after.reports.len(), 1);
    assert_eq!(after.pending, 0);
}

#[test]
fn nudge_until_viewed() {
    let svc = service(Group::RealTimeWithNudge);
    let now = t(WED);
    let acc = svc.request_style_feedback("s1", "mars", MARS_WEIGHT, true, now).unwrap();
    assert!(svc.get_visible_reports("s1", "mars", now).unwrap().nudge);
    svc.record_view(&acc.report_id, Some("s1"), now).unwrap();
    svc.record_view(&acc.report_id, None, now + Duration::seconds(5)).unwrap();
    let v = svc.get_visible_reports("s1", "mars", now).unwrap();
    assert!(!v.nudge);
    assert_eq!(svc.session(&SessionKey::new("s1", "mars")).unwrap().stored_reports[0].views.len(), 2);
}

#[test]
fn unknown_session_and_report() {
    let svc = service(Group::RealTime);
    assert_eq!(svc.get_visible_reports("nobody", "p", t(WED)), Err(ServiceError::UnknownSession));
    assert_eq!(svc.record_view(&ReportId("rpt-9".into()), None, t(WED)), Err(ServiceError::UnknownReport));
    let acc = svc.request_style_feedback("s1", "p", MARS_WEIGHT, true, t(WED)).unwrap();
    assert_eq!(svc.record_view(&acc.report_id, Some("intruder"), t(WED)), Err(ServiceError::UnknownReport));
}

#[test]
fn rating_overwrite_walk() {
    let svc = service(Group::Delay);
    let acc = svc.request_style_feedback("s1", "p", MARS_WEIGHT, true, t(WED)).unwrap();
    assert!(matches!(
        svc.record_rating(&acc.report_id, None, true, t(WED)),
        Err(ServiceError::NotVisible { .. })
    ));
    assert!(matches!(svc.record_view(&acc.report_id, None, t(WED)), Err(ServiceError::NotVisible { .. })));
    let monday = t("2026-03-09T08:00:00Z");
    svc.record_rating(&acc.report_id, None, true, monday).unwrap();
    assert_eq!(svc.ratings_summary(), RatingsSummary { helpful: 1, not_helpful: 0 });
    svc.record_rating(&acc.report_id, Some("s1"), false, monday + Duration::seconds(1)).unwrap();
    assert_eq!(svc.ratings_summary(), RatingsSummary { helpful: 0, not_helpful: 1 });
    let rec = svc.session(&SessionKey::new("s1", "p")).unwrap();
    assert_eq!(rec.ratings.len(), 1);
    assert_eq!(svc.get_visible_reports("s1", "p", monday).unwrap().reports[0].rating, Some(false));
}

#[test]
fn degraded_transport_still_stores_report() {
    let svc = SessionService::in_memory(only(Group::RealTime), engine(FaultMode::TransportError));
    let acc = svc.request_style_feedback("s1", "p", MARS_WEIGHT, true, t(WED)).unwrap();
    assert!(acc.degraded);
}

#[test]
fn replay_from_log_reconstructs_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let settings = ServiceSettings::default();
    let (svc, warnings) = SessionService::with_log(settings.clone(), engine(FaultMode::None), &path).unwrap();
    assert!(warnings.is_empty());
    let t0 = t(WED);
    for (i, student) in ["ann", "bo", "cy", "di"].iter().enumerate() {
        let now = t0 + Duration::seconds(i as i64);
        let _ = svc.request_style_feedback(student, "mars", MARS_WEIGHT, i % 3 != 2, now);
        svc.record_snapshot(student, "mars", "print(1)\n", true, now + Duration::seconds(30)).unwrap();
    }
    let monday = t("2026-03-09T12:00:00Z");
    for id in svc.state().reports.keys() {
        svc.record_view(id, None, monday).unwrap();
        svc.record_rating(id, None, true, monday).unwrap();
        svc.record_rating(id, None, false, monday + Duration::seconds(1)).unwrap();
    }
    let live = svc.state();
    drop(svc);

    let (events, warnings) = read_events(&path).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(ServiceState::replay(&events).unwrap(), live);

    // Reopening with different weights keeps every logged group.
    let other = ServiceSettings { weights: GroupWeights::new(1.0, 0.0, 0.0).unwrap(), ..settings };
    let (reopened, _) = SessionService::with_log(other, engine(FaultMode::None), &path).unwrap();
    assert_eq!(reopened.state(), live);
}

#[test]
fn log_lines_are_byte_stable() {
    let key = SessionKey::new("s", "p");
    let e = Event::ReportRated { key, report_id: ReportId("rpt-000001".into()), helpful: true, at: t(WED) };
    assert_eq!(
        e.to_json(),
        r#"{"event_type":"report_rated","ids":{"problem_id":"p","report_id":"rpt-000001","student_id":"s"},"payload":{"helpful":true},"timestamps":{"at":"2026-03-04T10:00:00Z"}}"#
    );
    assert_eq!(Event::from_json(&e.to_json()).unwrap(), e);
}

#[test]
fn corrupt_and_torn_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let good = Event::SessionOpened { key: SessionKey::new("s", "p"), group: Group::RealTime, at: t(WED) };
    std::fs::write(&path, format!("{}\nnot json\n{{\"event_type\":\"x\"", good.to_json())).unwrap();
    let (svc, warnings) = SessionService::with_log(only(Group::RealTime), engine(FaultMode::None), &path).unwrap();
    assert_eq!(warnings.len(), 2);
    svc.request_style_feedback("s", "p", MARS_WEIGHT, true, t(WED)).unwrap();
    let (events, warnings) = read_events(&path).unwrap();
    assert_eq!(events.len(), 2);
    assert_eq!(warnings.len(), 2);
}
