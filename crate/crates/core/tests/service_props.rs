use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stylefb_core::frontend::SourceProgram;
use stylefb_core::llm::{FaultMode, MockTransport, PromptTemplates};
use stylefb_core::pipeline::{FeedbackConfig, FeedbackEngine};
use stylefb_core::report::{Category, ItemKind};
use stylefb_core::service::{
    assign_group, read_events, unit_hash, Group, GroupWeights, ServiceSettings, ServiceState, SessionService,
};
use stylefb_core::synth::random_program;

const MARS_WEIGHT: &str = include_str!("fixtures/mars_weight.py");

fn engine(fault: FaultMode) -> FeedbackEngine {
    FeedbackEngine::new(FeedbackConfig::default(), PromptTemplates::default(), Arc::new(MockTransport::with_fault(fault)))
}

fn t(s: &str) -> DateTime<Utc> {
    s.parse().unwrap()
}

#[test]
fn unit_hash_matches_independent_sha256_values() {
    // Frozen from an independent SHA-256 implementation.
    assert_eq!(unit_hash("student-1", 0), 0.019816854377457283);
    assert_eq!(unit_hash("ann", 42), 0.12799404774801793);
    assert_eq!(unit_hash("s9999", 7), 0.513201829519296);
    let w = GroupWeights::default();
    assert_eq!(assign_group("student-1", &w, 0).unwrap(), Group::Delay);
    assert_eq!(assign_group("ann", &w, 42).unwrap(), Group::RealTime);
}

#[test]
fn ten_thousand_students_match_weights() {
    let w = GroupWeights::default();
    let mut counts = [0usize; 3];
    for i in 0..10_000 {
        let g = assign_group(&format!("student-{i}"), &w, 2024).unwrap();
        counts[g as usize] += 1;
        assert_eq!(assign_group(&format!("student-{i}"), &w, 2024).unwrap(), g);
    }
    for (count, weight) in counts.iter().zip([w.delay, w.realtime, w.nudge]) {
        let share = *count as f64 / 10_000.0;
        assert!((share - weight).abs() <= 0.015, "share {share} vs weight {weight}");
    }
}

#[test]
fn failing_transport_degrades_every_random_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let now = t("2026-03-04T10:00:00Z");
    let healthy = engine(FaultMode::None);
    for fault in [FaultMode::Always, FaultMode::TransportError] {
        let broken = engine(fault);
        for _ in 0..100 {
            let src = SourceProgram::new("p", random_program(&mut rng).render()).unwrap();
            let good = healthy.generate(&src, now).unwrap();
            let bad = broken.generate(&src, now).expect("no request errors out");
            assert!(bad.degraded);
            assert!(!bad.notices.is_empty());
            let cats: Vec<Category> = bad.sections.iter().map(|s| s.category).collect();
            assert_eq!(cats, Category::ALL);
            for static_cat in [Category::ConstantsAndMagicNumbers, Category::Decomposition] {
                assert_eq!(bad.section(static_cat), good.section(static_cat));
            }
            for llm_cat in [Category::IdentifierNames, Category::Comments] {
                assert!(bad.section(llm_cat).items.iter().any(|i| i.kind == ItemKind::Unavailable));
            }
        }
    }
}

#[test]
fn scripted_week_of_requests_respects_release() {
    let svc = SessionService::in_memory(ServiceSettings { seed: 11, ..ServiceSettings::default() }, engine(FaultMode::None));
    let monday = t("2026-03-09T00:00:00Z");
    let start = t("2026-03-02T00:00:00Z");
    let mut accepted = Vec::new();
    for i in 0..200 {
        let student = format!("s{i}");
        let at = start + Duration::minutes(i * 47); // spread across the week
        assert!(at < monday);
        let acc = svc.request_style_feedback(&student, "mars", MARS_WEIGHT, true, at).unwrap();
        assert_eq!(acc.visible_now, acc.group.sees_immediately());
        accepted.push((student, acc));
    }
    let groups: std::collections::BTreeSet<_> = accepted.iter().map(|(_, a)| a.group).collect();
    assert_eq!(groups.len(), 3, "script covers all groups");
    for (student, acc) in &accepted {
        let before = svc.get_visible_reports(student, "mars", monday - Duration::seconds(1)).unwrap();
        let after = svc.get_visible_reports(student, "mars", monday).unwrap();
        if acc.group == Group::Delay {
            assert!(before.reports.is_empty());
            assert_eq!(acc.visible_from, monday);
        } else {
            assert_eq!(before.reports.len(), 1);
        }
        assert_eq!(after.reports.len(), 1);
    }
}

#[derive(Debug, Clone)]
enum Op {
    Request { student: u8, passed: bool, skip_secs: u32 },
    Snapshot { student: u8, passed: bool },
    View { nth: u8 },
    Rate { nth: u8, helpful: bool },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u8..4, any::<bool>(), 0u32..1200).prop_map(|(student, passed, skip_secs)| Op::Request { student, passed, skip_secs }),
        (0u8..4, any::<bool>()).prop_map(|(student, passed)| Op::Snapshot { student, passed }),
        any::<u8>().prop_map(|nth| Op::View { nth }),
        (any::<u8>(), any::<bool>()).prop_map(|(nth, helpful)| Op::Rate { nth, helpful }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn replay_reconstructs_state_after_any_script(ops in prop::collection::vec(op(), 1..30), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let settings = ServiceSettings { seed, ..ServiceSettings::default() };
        let (svc, _) = SessionService::with_log(settings, engine(FaultMode::None), &path).unwrap();
        let mut now = t("2026-03-04T10:00:00Z");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for op in ops {
            now += Duration::seconds(rng.random_range(1..90));
            match op {
                Op::Request { student, passed, skip_secs } => {
                    now += Duration::seconds(skip_secs as i64);
                    let _ = svc.request_style_feedback(&format!("s{student}"), "p", MARS_WEIGHT, passed, now);
                }
                Op::Snapshot { student, passed } => {
                    let _ = svc.record_snapshot(&format!("s{student}"), "p", "print(1)\n", passed, now);
                }
                Op::View { nth } | Op::Rate { nth, .. } => {
                    let ids: Vec<_> = svc.state().reports.keys().cloned().collect();
                    if ids.is_empty() { continue; }
                    let id = &ids[nth as usize % ids.len()];
                    let later = now + Duration::days(7);
                    let _ = match op {
                        Op::Rate { helpful, .. } => svc.record_rating(id, None, helpful, later),
                        _ => svc.record_view(id, None, later),
                    };
                }
            }
        }
        let live = svc.state();
        let (events, warnings) = read_events(&path).unwrap();
        prop_assert!(warnings.is_empty());
        let replayed = ServiceState::replay(&events).unwrap();
        prop_assert_eq!(&replayed.sessions, &live.sessions);
        prop_assert_eq!(replayed, live);
    }
}
