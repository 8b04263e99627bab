use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::canon::canonicalize;
use crate::frontend::{is_uppercase_name, parse_number, parse_program, parse_tree, ProgramFacts, SourceProgram};
use crate::report::{ItemKind, StudentReport};
use crate::rules::{analyze_decomposition, FindingKind, RuleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditLabel {
    None,
    Functionality,
    Style,
    Combined,
}

impl EditLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            EditLabel::None => "none",
            EditLabel::Functionality => "functionality",
            EditLabel::Style => "style",
            EditLabel::Combined => "combined",
        }
    }

    pub fn is_style(self) -> bool {
        matches!(self, EditLabel::Style | EditLabel::Combined)
    }
}

/// Surface evidence that an edit touched style.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleChange {
    Rename,
    CommentChange,
    ConstantExtraction,
    FunctionSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncorporationKind {
    SuggestedNameAdopted,
    CommentAddedNearSuggestedLine,
    MagicNumberExtractedToConstant,
    DecompositionApplied,
}

/// A viewed feedback item the edit acted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incorporation {
    pub kind: IncorporationKind,
    /// Suggested name, literal, or function name(s) of the matched item.
    pub subject: String,
    pub line: Option<usize>,
}

// Invariants: label None => incorporation empty; incorporation non-empty => label is style or combined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditClassification {
    pub label: EditLabel,
    pub significant: bool,
    pub incorporation: Vec<Incorporation>,
    pub style_changes: Vec<StyleChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditConfig {
    /// Minimum token edit distance for an edit to count.
    pub significance_threshold: usize,
    /// Line tolerance when matching an added comment to a suggestion.
    pub comment_line_tolerance: usize,
}

impl Default for EditConfig {
    fn default() -> Self {
        Self { significance_threshold: 3, comment_line_tolerance: 1 }
    }
}

pub fn classify_edit(before: &str, after: &str, viewed: &[StudentReport]) -> EditClassification {
    classify_edit_with(&EditConfig::default(), before, after, viewed)
}

pub fn classify_edit_with(config: &EditConfig, before: &str, after: &str, viewed: &[StudentReport]) -> EditClassification {
    let unchanged = |label, significant| EditClassification {
        label,
        significant,
        incorporation: Vec::new(),
        style_changes: Vec::new(),
    };
    if before == after {
        return unchanged(EditLabel::None, false);
    }
    let (Some(fb), Some(fa)) = (facts_of(before), facts_of(after)) else {
        return unchanged(EditLabel::Functionality, true);
    };
    let (Ok(cb), Ok(ca)) = (canonicalize(before), canonicalize(after)) else {
        return unchanged(EditLabel::Functionality, true);
    };
    let significant = token_distance(before, after) >= config.significance_threshold;
    let style_changes = style_changes(&fb, &fa);
    let label = if cb == ca {
        EditLabel::Style
    } else if style_changes.is_empty() {
        EditLabel::Functionality
    } else {
        EditLabel::Combined
    };
    let incorporation =
        if label.is_style() { incorporation(config, &fb, &fa, viewed) } else { Vec::new() };
    EditClassification { label, significant, incorporation, style_changes }
}

fn facts_of(text: &str) -> Option<ProgramFacts> {
    let program = SourceProgram::new("edit", text).ok()?;
    parse_program(&program).ok()
}

/// Code tokens plus comment words; layout and whitespace do not count.
pub fn normalized_tokens(source: &str) -> Option<Vec<String>> {
    let parsed = parse_tree(source).ok()?;
    let mut out: Vec<String> = parsed.code.iter().filter(|t| t.is_code()).map(|t| t.text.clone()).collect();
    for c in &parsed.comments {
        out.extend(c.text.trim_start_matches('#').split_whitespace().map(str::to_string));
    }
    Some(out)
}

/// Levenshtein distance over normalized tokens. Unparseable input falls back to whitespace words.
pub fn token_distance(before: &str, after: &str) -> usize {
    let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    let a = normalized_tokens(before).unwrap_or_else(|| words(before));
    let b = normalized_tokens(after).unwrap_or_else(|| words(after));
    strsim::generic_levenshtein(&a, &b)
}

fn identifier_names(f: &ProgramFacts) -> BTreeSet<&str> {
    f.identifiers.iter().map(|i| i.name.as_str()).collect()
}

fn comment_counts(f: &ProgramFacts) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for text in f.comments.values() {
        *m.entry(text.as_str()).or_default() += 1;
    }
    m
}

fn uppercase_constants(f: &ProgramFacts) -> BTreeSet<&str> {
    f.module_constants.iter().filter(|c| c.is_uppercase).map(|c| c.name.as_str()).collect()
}

fn function_names(f: &ProgramFacts) -> BTreeSet<&str> {
    f.functions.iter().map(|f| f.name.as_str()).collect()
}

fn style_changes(before: &ProgramFacts, after: &ProgramFacts) -> Vec<StyleChange> {
    let mut out = Vec::new();
    let (nb, na) = (identifier_names(before), identifier_names(after));
    if nb.difference(&na).next().is_some() && na.difference(&nb).next().is_some() {
        out.push(StyleChange::Rename);
    }
    if comment_counts(before) != comment_counts(after) {
        out.push(StyleChange::CommentChange);
    }
    if uppercase_constants(after).difference(&uppercase_constants(before)).next().is_some() {
        out.push(StyleChange::ConstantExtraction);
    }
    if function_names(after).difference(&function_names(before)).next().is_some() {
        out.push(StyleChange::FunctionSplit);
    }
    out
}

/// Comments of `after` not matched one-for-one by equal text in `before`.
fn added_comment_lines(before: &ProgramFacts, after: &ProgramFacts) -> Vec<usize> {
    let mut budget = comment_counts(before);
    let mut lines = Vec::new();
    for (&line, text) in &after.comments {
        match budget.get_mut(text.as_str()) {
            Some(n) if *n > 0 => *n -= 1,
            _ => lines.push(line),
        }
    }
    lines
}

fn body_lines(f: &ProgramFacts, name: &str) -> Option<usize> {
    f.functions.iter().find(|g| g.name == name).map(|g| g.body_lines)
}

/// Each named function vanished or shrank.
fn split_applied(before: &ProgramFacts, after: &ProgramFacts, names: &[&str]) -> bool {
    names.iter().any(|n| match (body_lines(before, n), body_lines(after, n)) {
        (Some(_), None) => true,
        (Some(b), Some(a)) => a < b,
        _ => false,
    })
}

fn incorporation(
    config: &EditConfig,
    before: &ProgramFacts,
    after: &ProgramFacts,
    viewed: &[StudentReport],
) -> Vec<Incorporation> {
    let added_comments = added_comment_lines(before, after);
    let new_constants: Vec<_> = after
        .module_constants
        .iter()
        .filter(|c| c.is_uppercase && c.read_count > 0 && !before.module_constants.iter().any(|b| b.name == c.name))
        .collect();
    let more_functions = after.functions.len() > before.functions.len();
    let after_duplicates: BTreeSet<String> = analyze_decomposition(after, &RuleConfig::default())
        .into_iter()
        .filter(|f| f.kind == FindingKind::DuplicateBlock)
        .map(|f| f.subject)
        .collect();

    let mut out: Vec<Incorporation> = Vec::new();
    let mut push = |kind, subject: String, line| {
        if !out.iter().any(|i| i.kind == kind && i.subject == subject) {
            out.push(Incorporation { kind, subject, line });
        }
    };
    for item in viewed.iter().flat_map(|r| r.sections.iter().flat_map(|s| s.items.iter())) {
        match item.kind {
            ItemKind::IdentifierName => {
                if let Some(name) = &item.suggested_name {
                    if after.has_identifier(name) && !before.has_identifier(name) {
                        push(IncorporationKind::SuggestedNameAdopted, name.clone(), item.line);
                    }
                }
            }
            ItemKind::CommentSuggestion => {
                let Some(line) = item.line else { continue };
                if added_comments.iter().any(|&l| l.abs_diff(line) <= config.comment_line_tolerance) {
                    push(IncorporationKind::CommentAddedNearSuggestedLine, format!("line {line}"), Some(line));
                }
            }
            ItemKind::MagicNumber => {
                let Some(value) = item.subject.as_deref().and_then(parse_number) else { continue };
                if new_constants.iter().any(|c| is_uppercase_name(&c.name) && parse_number(&c.value) == Some(value)) {
                    push(IncorporationKind::MagicNumberExtractedToConstant, item.subject.clone().unwrap_or_default(), item.line);
                }
            }
            ItemKind::LongFunction => {
                let Some(name) = item.subject.as_deref() else { continue };
                if more_functions && split_applied(before, after, &[name]) {
                    push(IncorporationKind::DecompositionApplied, name.to_string(), item.line);
                }
            }
            ItemKind::DuplicateBlock => {
                let (Some(subject), Some(dup)) = (item.subject.as_deref(), &item.duplicate) else { continue };
                let names = [dup.first.function.as_str(), dup.second.function.as_str()];
                if more_functions && (split_applied(before, after, &names) || !after_duplicates.contains(subject)) {
                    push(IncorporationKind::DecompositionApplied, subject.to_string(), item.line);
                }
            }
            _ => {}
        }
    }
    out
}
