//! Brute-force oracle for duplicate-block detection on small programs.

use std::collections::BTreeSet;

use proptest::prelude::*;
use stylefb_core::frontend::{parse_program, SourceProgram};
use stylefb_core::rules::{analyze_decomposition, FindingKind, RuleConfig};

const LINES: &[&str] = &["x = 1", "y = x + 2", "print(x)", "x = y * 3"];

type Key = (String, usize, String, usize, usize);

fn render(funcs: &[Vec<usize>]) -> (String, Vec<usize>) {
    let mut text = String::new();
    let mut def_lines = Vec::new();
    let mut line = 1;
    for (k, body) in funcs.iter().enumerate() {
        text.push_str(&format!("def f{k}():\n"));
        def_lines.push(line);
        for &b in body {
            text.push_str(&format!("    {}\n", LINES[b]));
        }
        line += 1 + body.len();
    }
    (text, def_lines)
}

/// Every left-maximal diagonal start, extended as far as it goes.
fn oracle(funcs: &[Vec<usize>], def_lines: &[usize], min_len: usize) -> BTreeSet<Key> {
    let mut out = BTreeSet::new();
    for fa in 0..funcs.len() {
        for fb in fa..funcs.len() {
            let (a, b) = (&funcs[fa], &funcs[fb]);
            for i in 0..a.len() {
                for j in 0..b.len() {
                    if fa == fb && j <= i {
                        continue;
                    }
                    if i > 0 && j > 0 && a[i - 1] == b[j - 1] {
                        continue;
                    }
                    let mut len = 0;
                    while i + len < a.len() && j + len < b.len() && a[i + len] == b[j + len] {
                        len += 1;
                    }
                    if fa == fb {
                        len = len.min(j - i);
                    }
                    if len >= min_len {
                        out.insert((format!("f{fa}"), def_lines[fa] + 1 + i, format!("f{fb}"), def_lines[fb] + 1 + j, len));
                    }
                }
            }
        }
    }
    out
}

fn program() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0..LINES.len(), 1..=25), 1..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn duplicate_blocks_match_brute_force(funcs in program()) {
        let (text, def_lines) = render(&funcs);
        let facts = parse_program(&SourceProgram::new("dup", text).unwrap()).unwrap();
        let config = RuleConfig { max_findings_per_category: usize::MAX, ..RuleConfig::default() };
        let found: BTreeSet<Key> = analyze_decomposition(&facts, &config)
            .into_iter()
            .filter(|f| f.kind == FindingKind::DuplicateBlock)
            .map(|f| {
                let d = f.duplicate.expect("duplicate findings carry spans");
                (d.first.function, d.first.start_line, d.second.function, d.second.start_line, d.length)
            })
            .collect();
        prop_assert_eq!(found, oracle(&funcs, &def_lines, config.duplicate_min_lines));
    }
}

#[test]
fn boundary_four_versus_five_shared_lines() {
    for (shared, expected) in [(4, 0), (5, 1)] {
        let common: Vec<usize> = vec![0, 1, 2, 3, 0, 1, 2][..shared].to_vec();
        let a: Vec<usize> = common.clone();
        let mut b = vec![3];
        b.extend(&common);
        let (text, def_lines) = render(&[a.clone(), b.clone()]);
        let facts = parse_program(&SourceProgram::new("dup", text).unwrap()).unwrap();
        let n = analyze_decomposition(&facts, &RuleConfig::default())
            .into_iter()
            .filter(|f| f.kind == FindingKind::DuplicateBlock)
            .count();
        assert_eq!(n, expected, "shared = {shared}");
        assert_eq!(oracle(&[a, b], &def_lines, 5).len(), expected);
    }
}
