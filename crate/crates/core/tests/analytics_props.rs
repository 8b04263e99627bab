use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use stylefb_core::analytics::{canonicalize, classify_edit, trace_metrics, CodeSnapshot, EditLabel, SnapshotTrace};
use stylefb_core::synth::random_program;

const MARS_WEIGHT: &str = include_str!("fixtures/mars_weight.py");

#[test]
fn rename_invariance_over_500_perturbations_of_50_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = Vec::new();
    for p in 0..50 {
        let program = random_program(&mut rng);
        let base = canonicalize(&program.render()).unwrap();
        for k in 0..10 {
            let names = program.fresh_names(&mut rng);
            let text = program.render_with(&names, k % 2 == 0);
            if canonicalize(&text).unwrap() != base {
                violations.push((p, k, text));
            }
        }
    }
    assert!(violations.is_empty(), "{} violations, first: {:?}", violations.len(), violations.first());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn canonical_form_is_idempotent(seed in any::<u64>()) {
        let text = random_program(&mut ChaCha8Rng::seed_from_u64(seed)).render();
        let once = canonicalize(&text).unwrap();
        prop_assert_eq!(canonicalize(once.as_str()).unwrap(), once);
    }

    #[test]
    fn self_edit_is_none(seed in any::<u64>()) {
        let text = random_program(&mut ChaCha8Rng::seed_from_u64(seed)).render();
        let c = classify_edit(&text, &text, &[]);
        prop_assert_eq!(c.label, EditLabel::None);
        prop_assert!(!c.significant && c.incorporation.is_empty());
    }

    #[test]
    fn style_label_implies_equal_canonical_forms(a in any::<u64>(), b in any::<u64>(), rename in any::<bool>()) {
        let pa = random_program(&mut ChaCha8Rng::seed_from_u64(a));
        let before = pa.render();
        let after = if rename {
            pa.render_with(&pa.fresh_names(&mut ChaCha8Rng::seed_from_u64(b)), b % 2 == 0)
        } else {
            random_program(&mut ChaCha8Rng::seed_from_u64(b)).render()
        };
        let c = classify_edit(&before, &after, &[]);
        if c.label == EditLabel::Style {
            prop_assert_eq!(canonicalize(&before).unwrap(), canonicalize(&after).unwrap());
        }
        if rename && before != after {
            prop_assert_eq!(c.label, EditLabel::Style);
        }
        prop_assert!(c.incorporation.is_empty() || c.label.is_style());
    }

    #[test]
    fn metrics_are_permutation_invariant(seeds in prop::collection::vec(any::<u64>(), 1..8), rot in 0usize..8) {
        let t0: chrono::DateTime<chrono::Utc> = "2026-03-04T10:00:00Z".parse().unwrap();
        let traces: Vec<SnapshotTrace> = seeds.iter().enumerate().map(|(i, &s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let p = random_program(&mut rng);
            let renamed = p.render_with(&p.fresh_names(&mut rng), true);
            let other = random_program(&mut rng).render();
            let snap = |m: i64, source: String| CodeSnapshot { at: t0 + chrono::Duration::minutes(m), source, tests_passed: true };
            SnapshotTrace {
                student_id: format!("s{i}"),
                problem_id: "p".into(),
                snapshots: vec![snap(0, p.render()), snap(1, renamed), snap(2, other)],
                reports_viewed: vec![],
            }
        }).collect();
        let mut shuffled = traces.clone();
        shuffled.rotate_left(rot % traces.len());
        shuffled.reverse();
        prop_assert_eq!(trace_metrics(&traces), trace_metrics(&shuffled));
    }
}

#[test]
fn mars_weight_canonical_form_survives_rename_and_comment() {
    let renamed = MARS_WEIGHT.replace("weight_str", "weight_in_pounds");
    assert_eq!(canonicalize(MARS_WEIGHT).unwrap(), canonicalize(&renamed).unwrap());
}
