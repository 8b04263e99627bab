use crate::frontend::ProgramFacts;

use super::{FindingKind, RuleConfig, StyleFinding};

fn kind_rank(kind: FindingKind) -> u8 {
    match kind {
        FindingKind::UnusedConstant => 0,
        FindingKind::ConstantUsedAsVariable => 1,
        FindingKind::LowercaseConstant => 2,
        FindingKind::MagicNumber => 3,
        _ => 4,
    }
}

/// Constants and magic numbers, in source order.
pub fn analyze_constants(facts: &ProgramFacts, config: &RuleConfig) -> Vec<StyleFinding> {
    let mut out = Vec::new();

    for c in &facts.module_constants {
        if c.is_uppercase && c.read_count == 0 {
            out.push(StyleFinding {
                kind: FindingKind::UnusedConstant,
                line: c.line,
                subject: c.name.clone(),
                message: format!("The constant {} is defined on line {} but never used.", c.name, c.line),
                suggestion: Some(format!(
                    "Remove {} if it is not needed, or use it in place of the value {} in your code.",
                    c.name, c.value
                )),
                duplicate: None,
            });
        }
        if c.is_uppercase && c.reassignment_count > 0 {
            let times = if c.reassignment_count == 1 { "once more" } else { "more than once" };
            out.push(StyleFinding {
                kind: FindingKind::ConstantUsedAsVariable,
                line: c.line,
                subject: c.name.clone(),
                message: format!(
                    "{} is written like a constant, but it is assigned {times} after line {}.",
                    c.name, c.line
                ),
                suggestion: Some(format!(
                    "Give {} a single value, or use a lowercase variable name if the value needs to change.",
                    c.name
                )),
                duplicate: None,
            });
        }
        if !c.is_uppercase && c.reassignment_count == 0 && c.read_count >= 1 {
            let upper = c.name.to_uppercase();
            out.push(StyleFinding {
                kind: FindingKind::LowercaseConstant,
                line: c.line,
                subject: c.name.clone(),
                message: format!("{} never changes after line {}, so it works as a constant.", c.name, c.line),
                suggestion: Some(format!("Rename {} to {upper} to show that it is a constant.", c.name)),
                duplicate: None,
            });
        }
    }

    for lit in &facts.numeric_literals {
        if lit.defines_constant {
            continue;
        }
        if lit.as_f64().is_some_and(|v| config.is_exempt(v)) {
            continue;
        }
        out.push(StyleFinding {
            kind: FindingKind::MagicNumber,
            line: lit.line,
            subject: lit.value.clone(),
            message: format!(
                "The number {} on line {} appears without a name that explains what it means.",
                lit.value, lit.line
            ),
            suggestion: Some(format!(
                "Define a constant at the top of your program, such as DESCRIPTIVE_NAME = {}, and use that name here.",
                lit.value
            )),
            duplicate: None,
        });
    }

    out.sort_by_key(|f| (f.line, kind_rank(f.kind)));
    out.truncate(config.max_findings_per_category);
    out
}
