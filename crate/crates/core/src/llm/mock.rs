use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicU32, Ordering};

use serde_json::{json, Value};

use crate::frontend::lexer::{tokenize, TokenKind};
use crate::frontend::{parse_source, IdentifierFact, IdentifierKind, LiteralKind, ProgramFacts};

use super::{PromptCategory, PromptPayload, Transport, TransportError};

/// Deliberately broken output for retry tests.
const MALFORMED: &str = "Sure! Here is some feedback: {identifiers: [oops";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaultMode {
    #[default]
    None,
    /// The first `n` calls per category return malformed text.
    FailFirst(u32),
    /// Every call returns malformed text.
    Always,
    /// Every call fails at the transport level.
    TransportError,
}

/// Rule-based stand-in for a model. Always answers with schema-valid JSON
/// unless a fault mode says otherwise.
#[derive(Debug, Default)]
pub struct MockTransport {
    fault: FaultMode,
    identifier_calls: AtomicU32,
    comment_calls: AtomicU32,
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: FaultMode) -> Self {
        Self { fault, ..Self::default() }
    }

    /// Calls received so far for `category`.
    pub fn calls(&self, category: PromptCategory) -> u32 {
        self.counter(category).load(Ordering::SeqCst)
    }

    fn counter(&self, category: PromptCategory) -> &AtomicU32 {
        match category {
            PromptCategory::Identifiers => &self.identifier_calls,
            PromptCategory::Comments => &self.comment_calls,
        }
    }
}

impl Transport for MockTransport {
    fn send(&self, payload: &PromptPayload) -> Result<String, TransportError> {
        let call = self.counter(payload.category).fetch_add(1, Ordering::SeqCst) + 1;
        match self.fault {
            FaultMode::TransportError => return Err(TransportError::Network("connection refused".into())),
            FaultMode::Always => return Ok(MALFORMED.into()),
            FaultMode::FailFirst(n) if call <= n => return Ok(MALFORMED.into()),
            _ => {}
        }
        let Ok(facts) = parse_source(&payload.code_text) else {
            return Ok(match payload.category {
                PromptCategory::Identifiers => json!({ "identifiers": [] }),
                PromptCategory::Comments => json!({ "suggestions": [] }),
            }
            .to_string());
        };
        let body = match payload.category {
            PromptCategory::Identifiers => identifier_response(&facts),
            PromptCategory::Comments => comment_response(&facts, &payload.code_text),
        };
        Ok(body.to_string())
    }
}

const TYPE_SUFFIXES: &[(&str, &str)] = &[
    ("_string", "str"),
    ("_str", "str"),
    ("_int", "int"),
    ("_float", "float"),
    ("_bool", "bool"),
    ("_list", "list"),
];

fn kind_word(kind: LiteralKind) -> Option<&'static str> {
    match kind {
        LiteralKind::Int => Some("int"),
        LiteralKind::Float => Some("float"),
        LiteralKind::String => Some("str"),
        LiteralKind::Bool => Some("bool"),
        _ => None,
    }
}

fn split_suffix(name: &str) -> (&str, Option<&'static str>) {
    for (suffix, word) in TYPE_SUFFIXES {
        if let Some(base) = name.strip_suffix(suffix).filter(|b| !b.is_empty()) {
            return (base, Some(word));
        }
    }
    (name, None)
}

/// A suffix whose type disagrees with the first assigned value.
fn misleading_suffix(id: &IdentifierFact) -> Option<(&'static str, &'static str)> {
    let (_, suffix) = split_suffix(&id.name);
    let suffix = suffix?;
    let actual = kind_word(id.assigned_values.first()?.kind)?;
    (suffix != actual).then_some((suffix, actual))
}

#[derive(Debug, PartialEq)]
enum ValueShape {
    /// `float(x)`, `int(x)`, `str(x)` or `bool(x)` applied to one name.
    Conversion { to: String, arg: String },
    /// Arithmetic on exactly one name and at least one number.
    Scaled { arg: String },
    Call { callee: String },
    Other,
}

fn value_shape(text: &str) -> ValueShape {
    let Ok(toks) = tokenize(text) else { return ValueShape::Other };
    let code: Vec<_> = toks.iter().filter(|t| t.is_code()).collect();
    let texts: Vec<&str> = code.iter().map(|t| t.text.as_str()).collect();
    if let [f, "(", arg, ")"] = texts.as_slice() {
        if matches!(*f, "float" | "int" | "str" | "bool") && code[2].kind == TokenKind::Name {
            return ValueShape::Conversion { to: f.to_string(), arg: arg.to_string() };
        }
    }
    let names: Vec<&str> = code.iter().filter(|t| t.kind == TokenKind::Name).map(|t| t.text.as_str()).collect();
    let numbers = code.iter().filter(|t| t.kind == TokenKind::Number).count();
    let arithmetic = code.iter().all(|t| match t.kind {
        TokenKind::Name | TokenKind::Number => true,
        TokenKind::Op => matches!(t.text.as_str(), "*" | "/" | "+" | "-" | "//" | "%" | "**" | "(" | ")"),
        _ => false,
    });
    if arithmetic && names.len() == 1 && numbers >= 1 {
        return ValueShape::Scaled { arg: names[0].to_string() };
    }
    if code.len() >= 3 && code[0].kind == TokenKind::Name && texts[1] == "(" {
        return ValueShape::Call { callee: texts[0].to_string() };
    }
    ValueShape::Other
}

struct Namer {
    /// Names already suggested, so later items can build on them.
    renamed: Vec<(String, String)>,
    taken: HashSet<String>,
}

impl Namer {
    fn new(facts: &ProgramFacts) -> Self {
        let taken = facts.identifiers.iter().map(|i| i.name.clone()).collect();
        Self { renamed: Vec::new(), taken }
    }

    /// Readable stem for a name: its suggestion if it has one, minus any type suffix.
    fn stem(&self, name: &str) -> String {
        let current = self
            .renamed
            .iter()
            .find(|(from, _)| from == name)
            .map(|(_, to)| to.as_str())
            .unwrap_or(name);
        split_suffix(current).0.to_string()
    }

    fn propose(&self, id: &IdentifierFact) -> String {
        let (base, _) = split_suffix(&id.name);
        if let Some((_, actual)) = misleading_suffix(id) {
            return format!("{base}_{}", if actual == "str" { "text" } else { actual });
        }
        let Some(first) = id.assigned_values.first() else {
            return format!("{}_value", id.name);
        };
        let single_letter = id.name.chars().count() == 1;
        match value_shape(&first.text) {
            ValueShape::Conversion { to, arg } => format!("{}_{to}", self.stem(&arg)),
            ValueShape::Scaled { arg } => format!("scaled_{}", self.stem(&arg)),
            ValueShape::Call { callee } if single_letter => format!("{callee}_result"),
            _ if single_letter => match kind_word(first.kind) {
                Some("str") => "text_value".into(),
                Some(word) => format!("{word}_value"),
                None => "result_value".into(),
            },
            _ => format!("{}_value", id.name),
        }
    }

    fn unique(&mut self, from: &str, candidate: String) -> String {
        let mut name = candidate.clone();
        let mut n = 2;
        while self.taken.contains(&name) || crate::frontend::lexer::is_keyword(&name) {
            name = format!("{candidate}_{n}");
            n += 1;
        }
        self.taken.insert(name.clone());
        self.renamed.push((from.to_string(), name.clone()));
        name
    }
}

fn identifier_response(facts: &ProgramFacts) -> Value {
    let mut namer = Namer::new(facts);
    let mut ids: Vec<&IdentifierFact> = facts
        .identifiers
        .iter()
        .filter(|i| matches!(i.kind, IdentifierKind::Variable | IdentifierKind::Parameter))
        .collect();
    ids.sort_by_key(|i| i.first_line);
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    for id in ids {
        if !seen.insert(id.name.as_str()) {
            continue;
        }
        let proposal = namer.propose(id);
        let suggested = namer.unique(&id.name, proposal);
        let (score, misleading, explanation) = if let Some((suffix, actual)) = misleading_suffix(id) {
            (
                3,
                true,
                format!(
                    "The name {} suggests it stores a {suffix}, but it stores a {actual}. {suggested} describes the value more accurately.",
                    id.name
                ),
            )
        } else if id.name.chars().count() == 1 {
            (
                2,
                false,
                format!(
                    "A single letter like {} does not say what the value means. {suggested} tells the reader what it stores.",
                    id.name
                ),
            )
        } else {
            (8, false, format!("{} already describes what it stores.", id.name))
        };
        items.push(json!({
            "name": id.name,
            "line": id.first_line,
            "score": score,
            "misleading_type": misleading,
            "suggested_name": suggested,
            "explanation": explanation,
        }));
    }
    json!({ "identifiers": items })
}

fn comment_response(facts: &ProgramFacts, code: &str) -> Value {
    let mut out = serde_json::Map::new();
    if let Some((&line, _)) = facts.comments.iter().next() {
        out.insert(
            "positive".into(),
            json!({ "line": line, "text": format!("Great job adding a comment on line {line} to describe what that code does.") }),
        );
    }

    let exempt = |v: Option<f64>| matches!(v, Some(x) if x == 0.0 || x == 1.0 || x == -1.0);
    let mut numbers: Vec<(usize, String)> = facts
        .numeric_literals
        .iter()
        .filter(|l| !exempt(l.as_f64()))
        .map(|l| (l.line, l.value.clone()))
        .collect();
    numbers.dedup_by_key(|(line, _)| *line);

    let mut conversions: Vec<(usize, String)> = Vec::new();
    if let Ok(toks) = tokenize(code) {
        let code_toks: Vec<_> = toks.iter().filter(|t| t.is_code()).collect();
        for w in code_toks.windows(2) {
            if w[0].kind == TokenKind::Name && matches!(w[0].text.as_str(), "float" | "int") && w[1].text == "(" {
                conversions.push((w[0].line, w[0].text.clone()));
            }
        }
    }

    let commented = |line: usize| facts.comments.contains_key(&line) || facts.comments.contains_key(&(line.wrapping_sub(1)));
    let candidate_lines: BTreeSet<usize> =
        numbers.iter().map(|(l, _)| *l).chain(conversions.iter().map(|(l, _)| *l)).collect();
    let mut suggestions = Vec::new();
    for line in candidate_lines.into_iter().filter(|&l| !commented(l)).take(2) {
        let text = if let Some((_, to)) = conversions.iter().find(|(l, _)| *l == line) {
            let target = if to == "float" { "a float" } else { "an integer" };
            format!("Consider adding a comment on line {line} to explain the purpose of converting the value to {target}.")
        } else {
            let value = &numbers.iter().find(|(l, _)| *l == line).expect("candidate line").1;
            format!(
                "On line {line}, you could add a comment to describe the calculation being performed and why the value {value} is used."
            )
        };
        suggestions.push(json!({ "line": line, "text": text }));
    }
    out.insert("suggestions".into(), Value::Array(suggestions));
    Value::Object(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_shapes() {
        assert_eq!(
            value_shape("float(weight)"),
            ValueShape::Conversion { to: "float".into(), arg: "weight".into() }
        );
        assert_eq!(value_shape("weight_str * 0.378"), ValueShape::Scaled { arg: "weight_str".into() });
        assert_eq!(value_shape("input(\"x\")"), ValueShape::Call { callee: "input".into() });
        assert_eq!(value_shape("a + b"), ValueShape::Other);
    }

    #[test]
    fn suffix_split() {
        assert_eq!(split_suffix("weight_str"), ("weight", Some("str")));
        assert_eq!(split_suffix("name_string"), ("name", Some("str")));
        assert_eq!(split_suffix("_str"), ("_str", None));
    }
}
