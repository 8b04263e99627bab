use std::collections::BTreeSet;

use crate::frontend::{FunctionFact, ProgramFacts};

use super::{BlockSpan, DuplicatePair, FindingKind, RuleConfig, StyleFinding};

/// A maximal run of equal lines: `a[a_start..a_start+len] == b[b_start..b_start+len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CommonRun {
    pub a_start: usize,
    pub b_start: usize,
    pub len: usize,
}

/// Maximal diagonal runs of length at least `min_len` between two sequences.
///
/// When `same` is set the sequences are one function compared with itself:
/// only diagonals with `b_start > a_start` are considered, and a run is clipped
/// to the diagonal offset so the two copies never overlap.
pub fn common_runs<T: PartialEq>(a: &[T], b: &[T], same: bool, min_len: usize) -> Vec<CommonRun> {
    let min_len = min_len.max(1);
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut runs = Vec::new();
    for i in 0..a.len() {
        for j in 0..b.len() {
            cur[j + 1] = if (!same || j > i) && a[i] == b[j] { prev[j] + 1 } else { 0 };
        }
        for j in 0..b.len() {
            let len = cur[j + 1];
            if len == 0 {
                continue;
            }
            let extends = i + 1 < a.len() && j + 1 < b.len() && a[i + 1] == b[j + 1];
            if extends {
                continue;
            }
            let a_start = i + 1 - len;
            let b_start = j + 1 - len;
            let len = if same { len.min(b_start - a_start) } else { len };
            if len >= min_len {
                runs.push(CommonRun { a_start, b_start, len });
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    runs.sort();
    runs
}

fn span(f: &FunctionFact, start: usize, len: usize) -> BlockSpan {
    BlockSpan {
        function: f.name.clone(),
        start_line: f.normalized_body[start].line,
        end_line: f.normalized_body[start + len - 1].line,
    }
}

fn duplicate_finding(a: &FunctionFact, b: &FunctionFact, run: CommonRun) -> StyleFinding {
    let first = span(a, run.a_start, run.len);
    let second = span(b, run.b_start, run.len);
    let (subject, message) = if a.name == b.name && a.def_line == b.def_line {
        (
            a.name.clone(),
            format!(
                "The function {} repeats the same {} lines twice (lines {}-{} and {}-{}).",
                a.name, run.len, first.start_line, first.end_line, second.start_line, second.end_line
            ),
        )
    } else {
        (
            format!("{} and {}", a.name, b.name),
            format!(
                "The functions {} and {} share the same {} lines (lines {}-{} and {}-{}).",
                a.name, b.name, run.len, first.start_line, first.end_line, second.start_line, second.end_line
            ),
        )
    };
    StyleFinding {
        kind: FindingKind::DuplicateBlock,
        line: first.start_line,
        subject,
        message,
        suggestion: Some("Move the repeated lines into a helper function and call it from both places.".into()),
        duplicate: Some(DuplicatePair { first, second, length: run.len }),
    }
}

/// Long functions and duplicated blocks of normalized lines.
pub fn analyze_decomposition(facts: &ProgramFacts, config: &RuleConfig) -> Vec<StyleFinding> {
    let mut long = Vec::new();
    for f in &facts.functions {
        if f.body_lines > config.long_function_lines {
            long.push(StyleFinding {
                kind: FindingKind::LongFunction,
                line: f.def_line,
                subject: f.name.clone(),
                message: format!(
                    "The function {} has {} lines of code, which makes it hard to follow.",
                    f.name, f.body_lines
                ),
                suggestion: Some(format!(
                    "Split {} into smaller helper functions that each do one task.",
                    f.name
                )),
                duplicate: None,
            });
        }
    }

    let texts: Vec<Vec<&str>> = facts
        .functions
        .iter()
        .map(|f| f.normalized_body.iter().map(|l| l.text.as_str()).collect())
        .collect();
    let mut seen = BTreeSet::new();
    let mut dups = Vec::new();
    for (ia, a) in facts.functions.iter().enumerate() {
        for (ib, b) in facts.functions.iter().enumerate().skip(ia) {
            let same = ia == ib;
            for run in common_runs(&texts[ia], &texts[ib], same, config.duplicate_min_lines) {
                if seen.insert((ia, ib, run)) {
                    dups.push(duplicate_finding(a, b, run));
                }
            }
        }
    }

    let mut out = long;
    out.extend(dups);
    out.truncate(config.max_findings_per_category);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn body(lines: &[&str]) -> String {
        lines.iter().map(|l| format!("    {l}\n")).collect()
    }

    const BLOCK: [&str; 5] = ["a = read()", "b = a * 2", "c = b + a", "d = c - b", "show(d)"];

    #[test]
    fn mars_weight_has_no_decomposition_findings() {
        let facts = parse_source(crate::frontend::tests::MARS_WEIGHT).unwrap();
        assert!(analyze_decomposition(&facts, &RuleConfig::default()).is_empty());
    }

    #[test]
    fn long_function_threshold() {
        let sixteen: Vec<String> = (0..16).map(|i| format!("x{i} = {i}")).collect();
        let refs: Vec<&str> = sixteen.iter().map(String::as_str).collect();
        let src = format!("def big():\n{}", body(&refs));
        let found = analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, FindingKind::LongFunction);
        assert!(found[0].message.contains("16"));

        let src = format!("def ok():\n{}", body(&refs[..15]));
        assert!(analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default()).is_empty());
    }

    #[test]
    fn duplicate_across_functions() {
        let src = format!(
            "def first():\n{}\ndef second():\n    prep = 0\n{}",
            body(&BLOCK),
            body(&BLOCK)
        );
        let found = analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default());
        assert_eq!(found.len(), 1);
        let d = found[0].duplicate.as_ref().unwrap();
        assert_eq!(d.length, 5);
        assert_eq!((d.first.function.as_str(), d.first.start_line, d.first.end_line), ("first", 2, 6));
        assert_eq!((d.second.function.as_str(), d.second.start_line, d.second.end_line), ("second", 10, 14));
        assert_eq!(found[0].subject, "first and second");
    }

    #[test]
    fn four_shared_lines_are_not_reported() {
        let src = format!("def first():\n{}\ndef second():\n{}", body(&BLOCK[..4]), body(&BLOCK[..4]));
        assert!(analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default()).is_empty());
    }

    #[test]
    fn whitespace_and_comments_are_normalized() {
        let spaced: Vec<String> = BLOCK.iter().map(|l| format!("{}   # note", l.replace(' ', "  "))).collect();
        let refs: Vec<&str> = spaced.iter().map(String::as_str).collect();
        let src = format!("def first():\n{}\ndef second():\n{}", body(&BLOCK), body(&refs));
        let found = analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default());
        assert_eq!(found.len(), 1);
    }

    #[test]
    fn repeated_block_within_one_function() {
        let mut lines = BLOCK.to_vec();
        lines.push("print('again')");
        lines.extend(BLOCK);
        let src = format!("def twice():\n{}", body(&lines));
        let found = analyze_decomposition(&parse_source(&src).unwrap(), &RuleConfig::default());
        assert_eq!(found.len(), 1);
        let d = found[0].duplicate.as_ref().unwrap();
        assert_eq!((d.first.start_line, d.second.start_line, d.length), (2, 8, 5));
        assert_eq!(found[0].subject, "twice");
    }

    #[test]
    fn self_overlap_is_clipped() {
        // Seven equal lines: offset d gives a run of 7-d clipped to d.
        let runs = common_runs(&[1; 7], &[1; 7], true, 3);
        assert_eq!(
            runs,
            vec![CommonRun { a_start: 0, b_start: 3, len: 3 }, CommonRun { a_start: 0, b_start: 4, len: 3 }]
        );
    }
}
