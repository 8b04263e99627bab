use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::frontend::lexer::is_keyword;
use crate::frontend::{is_identifier, ProgramFacts};

use super::PromptCategory;

pub const MAX_COMMENT_SUGGESTIONS: usize = 2;
/// Longer model texts are dropped rather than shown.
pub const MAX_TEXT_LEN: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SchemaError {
    #[error("response is not JSON: {0}")]
    NotJson(String),
    #[error("response has the wrong shape: {0}")]
    WrongShape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierItem {
    pub name: String,
    pub line: usize,
    /// 1 to 10. Never shown to students.
    pub score: u8,
    pub misleading_type: bool,
    pub suggested_name: String,
    pub explanation: String,
}

impl IdentifierItem {
    pub fn is_visible(&self, surface_threshold: u8) -> bool {
        self.misleading_type || self.score <= surface_threshold
    }
}

/// A model item that failed validation, kept for diagnostics only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub category: PromptCategory,
    pub reason: String,
    /// Compact JSON of the offending item.
    pub item: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierValidation {
    pub items: Vec<IdentifierItem>,
    pub dropped: Vec<DroppedItem>,
}

impl IdentifierValidation {
    pub fn visible(&self, surface_threshold: u8) -> impl Iterator<Item = &IdentifierItem> {
        self.items.iter().filter(move |i| i.is_visible(surface_threshold))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveComment {
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentSuggestion {
    pub line: usize,
    pub text: String,
}

/// Invariants: `positive` only when the program has a comment on that line;
/// at most two suggestions, each on an existing line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentItems {
    pub positive: Option<PositiveComment>,
    pub suggestions: Vec<CommentSuggestion>,
}

impl CommentItems {
    pub fn is_empty(&self) -> bool {
        self.positive.is_none() && self.suggestions.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentValidation {
    pub items: CommentItems,
    pub dropped: Vec<DroppedItem>,
}

fn strip_fence(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let Some(body) = rest.strip_suffix("```") else { return t };
    // Drop an info string such as `json` on the opening fence.
    match body.find('\n') {
        Some(nl) if !body[..nl].contains('{') => &body[nl + 1..],
        _ => body,
    }
}

/// Parses `raw` and checks the top-level shape for `category`.
pub fn check_shape(category: PromptCategory, raw: &str) -> Result<Map<String, Value>, SchemaError> {
    let value: Value = serde_json::from_str(strip_fence(raw)).map_err(|e| SchemaError::NotJson(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(SchemaError::WrongShape("top level must be an object".into()));
    };
    match category {
        PromptCategory::Identifiers => match obj.get("identifiers") {
            Some(Value::Array(_)) => {}
            Some(_) => return Err(SchemaError::WrongShape("\"identifiers\" must be an array".into())),
            None => return Err(SchemaError::WrongShape("missing \"identifiers\"".into())),
        },
        PromptCategory::Comments => {
            if !matches!(obj.get("suggestions"), None | Some(Value::Array(_))) {
                return Err(SchemaError::WrongShape("\"suggestions\" must be an array".into()));
            }
            if !matches!(obj.get("positive"), None | Some(Value::Null) | Some(Value::Object(_))) {
                return Err(SchemaError::WrongShape("\"positive\" must be an object".into()));
            }
        }
    }
    Ok(obj)
}

fn is_snake_case(name: &str) -> bool {
    is_identifier(name)
        && !is_keyword(name)
        && name.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && name.chars().any(|c| c.is_ascii_lowercase())
}

fn field_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    obj.get(key).and_then(Value::as_str).ok_or_else(|| format!("missing or non-string \"{key}\""))
}

fn field_uint(obj: &Map<String, Value>, key: &str) -> Result<u64, String> {
    obj.get(key).and_then(Value::as_u64).ok_or_else(|| format!("missing or non-integer \"{key}\""))
}

fn clean_text(text: &str, key: &str) -> Result<String, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err(format!("empty \"{key}\""));
    }
    if t.chars().count() > MAX_TEXT_LEN {
        return Err(format!("\"{key}\" longer than {MAX_TEXT_LEN} characters"));
    }
    Ok(t.to_string())
}

fn line_field(obj: &Map<String, Value>, facts: &ProgramFacts) -> Result<usize, String> {
    let line = field_uint(obj, "line")?;
    let line = usize::try_from(line).map_err(|_| "line out of range".to_string())?;
    if !facts.line_in_range(line) {
        return Err(format!("line {line} is outside the program"));
    }
    Ok(line)
}

fn parse_identifier(v: &Value, facts: &ProgramFacts, seen: &HashSet<String>) -> Result<IdentifierItem, String> {
    let obj = v.as_object().ok_or("item is not an object")?;
    let name = field_str(obj, "name")?;
    if !facts.has_identifier(name) {
        return Err(format!("{name} does not appear in the program"));
    }
    if seen.contains(name) {
        return Err(format!("{name} already has an item"));
    }
    let line = line_field(obj, facts)?;
    let score = obj
        .get("score")
        .and_then(Value::as_i64)
        .ok_or("missing or non-integer \"score\"")?;
    if !(1..=10).contains(&score) {
        return Err(format!("score {score} outside 1-10"));
    }
    let misleading_type = obj
        .get("misleading_type")
        .and_then(Value::as_bool)
        .ok_or("missing or non-boolean \"misleading_type\"")?;
    let suggested = field_str(obj, "suggested_name")?.trim();
    if !is_snake_case(suggested) {
        return Err(format!("{suggested:?} is not a lowercase snake_case identifier"));
    }
    if suggested == name {
        return Err("suggested name equals the original".into());
    }
    if facts.has_identifier(suggested) {
        return Err(format!("{suggested} is already used in the program"));
    }
    let explanation = clean_text(field_str(obj, "explanation")?, "explanation")?;
    Ok(IdentifierItem {
        name: name.to_string(),
        line,
        score: score as u8,
        misleading_type,
        suggested_name: suggested.to_string(),
        explanation,
    })
}

fn dropped(category: PromptCategory, reason: String, item: &Value) -> DroppedItem {
    tracing::debug!(?category, %reason, "dropping model item");
    DroppedItem { category, reason, item: item.to_string() }
}

/// Keeps only items that refer to real identifiers and lines; everything
/// else lands in `dropped`.
pub fn validate_identifier_response(raw: &str, facts: &ProgramFacts) -> Result<IdentifierValidation, SchemaError> {
    let obj = check_shape(PromptCategory::Identifiers, raw)?;
    let mut out = IdentifierValidation::default();
    let mut seen = HashSet::new();
    for v in obj["identifiers"].as_array().into_iter().flatten() {
        match parse_identifier(v, facts, &seen) {
            Ok(item) => {
                seen.insert(item.name.clone());
                out.items.push(item);
            }
            Err(reason) => out.dropped.push(dropped(PromptCategory::Identifiers, reason, v)),
        }
    }
    Ok(out)
}

fn parse_line_text(v: &Value, facts: &ProgramFacts) -> Result<(usize, String), String> {
    let obj = v.as_object().ok_or("item is not an object")?;
    let line = line_field(obj, facts)?;
    let text = clean_text(field_str(obj, "text")?, "text")?;
    Ok((line, text))
}

pub fn validate_comment_response(raw: &str, facts: &ProgramFacts) -> Result<CommentValidation, SchemaError> {
    let obj = check_shape(PromptCategory::Comments, raw)?;
    let mut out = CommentValidation::default();
    let cat = PromptCategory::Comments;

    if let Some(p) = obj.get("positive").filter(|p| !p.is_null()) {
        let parsed = if facts.comments.is_empty() {
            Err("praise for a program without comments".to_string())
        } else {
            parse_line_text(p, facts).and_then(|(line, text)| {
                if facts.comments.contains_key(&line) {
                    Ok(PositiveComment { line, text })
                } else {
                    Err(format!("line {line} has no comment"))
                }
            })
        };
        match parsed {
            Ok(pc) => out.items.positive = Some(pc),
            Err(reason) => out.dropped.push(dropped(cat, reason, p)),
        }
    }

    for v in obj.get("suggestions").and_then(Value::as_array).into_iter().flatten() {
        match parse_line_text(v, facts) {
            Ok(_) if out.items.suggestions.len() >= MAX_COMMENT_SUGGESTIONS => {
                out.dropped.push(dropped(cat, "more than two suggestions".into(), v))
            }
            Ok((line, text)) => out.items.suggestions.push(CommentSuggestion { line, text }),
            Err(reason) => out.dropped.push(dropped(cat, reason, v)),
        }
    }
    Ok(out)
}
