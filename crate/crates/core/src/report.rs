//! The four-section feedback report, its plain-text rendering and the
//! student-facing view without diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::llm::{CategoryOutcome, DroppedItem, IdentifierItem, LlmFeedback, PromptCategory};
use crate::rules::{DuplicatePair, FindingKind, StyleFinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    IdentifierNames,
    ConstantsAndMagicNumbers,
    Comments,
    Decomposition,
}

impl Category {
    /// Display order.
    pub const ALL: [Category; 4] =
        [Category::IdentifierNames, Category::ConstantsAndMagicNumbers, Category::Comments, Category::Decomposition];

    pub fn title(self) -> &'static str {
        match self {
            Category::IdentifierNames => "Identifier Names",
            Category::ConstantsAndMagicNumbers => "Constants and Magic Numbers",
            Category::Comments => "Comments",
            Category::Decomposition => "Decomposition",
        }
    }

    fn nothing_to_flag(self) -> &'static str {
        match self {
            Category::IdentifierNames => "Nothing to flag: your identifier names look clear.",
            Category::ConstantsAndMagicNumbers => "Nothing to flag: no magic numbers or constant issues found.",
            Category::Comments => "Nothing to flag: no comment feedback for this program.",
            Category::Decomposition => "Nothing to flag: your functions are a good size with no repeated code.",
        }
    }

    fn unavailable(self) -> &'static str {
        match self {
            Category::IdentifierNames => {
                "Sorry, identifier name feedback is not available right now. Please try again later."
            }
            _ => "Sorry, comment feedback is not available right now. Please try again later.",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    IdentifierName,
    UnusedConstant,
    MagicNumber,
    ConstantUsedAsVariable,
    LowercaseConstant,
    CommentPraise,
    CommentSuggestion,
    LongFunction,
    DuplicateBlock,
    NothingToFlag,
    Unavailable,
}

impl From<FindingKind> for ItemKind {
    fn from(k: FindingKind) -> Self {
        match k {
            FindingKind::UnusedConstant => ItemKind::UnusedConstant,
            FindingKind::MagicNumber => ItemKind::MagicNumber,
            FindingKind::ConstantUsedAsVariable => ItemKind::ConstantUsedAsVariable,
            FindingKind::LowercaseConstant => ItemKind::LowercaseConstant,
            FindingKind::LongFunction => ItemKind::LongFunction,
            FindingKind::DuplicateBlock => ItemKind::DuplicateBlock,
        }
    }
}

/// One student-facing entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportItem {
    pub kind: ItemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate: Option<DuplicatePair>,
}

impl ReportItem {
    fn plain(kind: ItemKind, message: &str) -> Self {
        Self {
            kind,
            line: None,
            subject: None,
            message: message.to_string(),
            suggestion: None,
            suggested_name: None,
            duplicate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub category: Category,
    pub items: Vec<ReportItem>,
}

/// Hidden fields for instructors and debugging. Never part of the student view.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Every validated identifier item, with its score.
    pub identifier_items: Vec<IdentifierItem>,
    pub dropped: Vec<DroppedItem>,
    pub attempts: BTreeMap<PromptCategory, u32>,
    pub latency_ms: BTreeMap<PromptCategory, u64>,
    pub errors: BTreeMap<PromptCategory, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub problem_id: String,
    pub generated_at: DateTime<Utc>,
    /// Always the four categories in `Category::ALL` order.
    pub sections: Vec<Section>,
    pub notices: Vec<String>,
    pub diagnostics: Diagnostics,
    /// True iff at least one model-backed category fell back.
    pub degraded: bool,
}

/// What a student may see: the report without diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentReport {
    pub problem_id: String,
    pub generated_at: DateTime<Utc>,
    pub sections: Vec<Section>,
    pub notices: Vec<String>,
    pub degraded: bool,
}

impl FeedbackReport {
    pub fn student_view(&self) -> StudentReport {
        StudentReport {
            problem_id: self.problem_id.clone(),
            generated_at: self.generated_at,
            sections: self.sections.clone(),
            notices: self.notices.clone(),
            degraded: self.degraded,
        }
    }

    pub fn section(&self, category: Category) -> &Section {
        self.sections.iter().find(|s| s.category == category).expect("all four sections are present")
    }

    /// Pretty JSON with struct field order; stable across runs.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Every visible item across sections, in display order.
    pub fn visible_items(&self) -> impl Iterator<Item = &ReportItem> {
        self.sections.iter().flat_map(|s| s.items.iter())
    }
}

impl StudentReport {
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    pub problem_id: String,
    pub generated_at: DateTime<Utc>,
    pub surface_threshold: u8,
}

fn finding_item(f: &StyleFinding) -> ReportItem {
    ReportItem {
        kind: f.kind.into(),
        line: Some(f.line),
        subject: Some(f.subject.clone()),
        message: f.message.clone(),
        suggestion: f.suggestion.clone(),
        suggested_name: None,
        duplicate: f.duplicate.clone(),
    }
}

fn record<T>(diag: &mut Diagnostics, cat: PromptCategory, outcome: &CategoryOutcome<T>) {
    diag.attempts.insert(cat, outcome.attempt_count);
    diag.latency_ms.insert(cat, outcome.latency_ms);
    if let Err(e) = &outcome.result {
        diag.errors.insert(cat, e.to_string());
    }
}

const DEGRADED_NOTICE: &str =
    "Sorry, part of your feedback could not be generated right now. The sections below that are available are complete, and you can ask again later for the rest.";

/// Deterministic merge of static findings and validated model items.
pub fn assemble_report(static_findings: &[StyleFinding], llm: &LlmFeedback, meta: &ReportMeta) -> FeedbackReport {
    let mut diag = Diagnostics::default();
    record(&mut diag, PromptCategory::Identifiers, &llm.identifiers);
    record(&mut diag, PromptCategory::Comments, &llm.comments);

    let mut identifiers = Vec::new();
    let mut ids_ok = true;
    match &llm.identifiers.result {
        Ok(v) => {
            diag.identifier_items = v.items.clone();
            diag.dropped.extend(v.dropped.iter().cloned());
            for item in v.visible(meta.surface_threshold) {
                identifiers.push(ReportItem {
                    kind: ItemKind::IdentifierName,
                    line: Some(item.line),
                    subject: Some(item.name.clone()),
                    message: item.explanation.clone(),
                    suggestion: Some(format!("Consider renaming {} to {}.", item.name, item.suggested_name)),
                    suggested_name: Some(item.suggested_name.clone()),
                    duplicate: None,
                });
            }
        }
        Err(_) => ids_ok = false,
    }

    let mut comments = Vec::new();
    let mut comments_ok = true;
    match &llm.comments.result {
        Ok(v) => {
            diag.dropped.extend(v.dropped.iter().cloned());
            if let Some(p) = &v.items.positive {
                let mut item = ReportItem::plain(ItemKind::CommentPraise, &p.text);
                item.line = Some(p.line);
                comments.push(item);
            }
            for s in &v.items.suggestions {
                let mut item = ReportItem::plain(ItemKind::CommentSuggestion, &s.text);
                item.line = Some(s.line);
                comments.push(item);
            }
        }
        Err(_) => comments_ok = false,
    }

    let mut constants = Vec::new();
    let mut decomposition = Vec::new();
    for f in static_findings {
        match f.kind {
            FindingKind::LongFunction | FindingKind::DuplicateBlock => decomposition.push(finding_item(f)),
            _ => constants.push(finding_item(f)),
        }
    }

    let available = |c: Category| match c {
        Category::IdentifierNames => ids_ok,
        Category::Comments => comments_ok,
        _ => true,
    };
    let sections = Category::ALL
        .into_iter()
        .zip([identifiers, constants, comments, decomposition])
        .map(|(category, mut items)| {
            items.sort_by_key(|i| i.line);
            if !available(category) {
                items = vec![ReportItem::plain(ItemKind::Unavailable, category.unavailable())];
            } else if items.is_empty() {
                items = vec![ReportItem::plain(ItemKind::NothingToFlag, category.nothing_to_flag())];
            }
            Section { category, items }
        })
        .collect();

    let degraded = !(ids_ok && comments_ok);
    FeedbackReport {
        problem_id: meta.problem_id.clone(),
        generated_at: meta.generated_at,
        sections,
        notices: if degraded { vec![DEGRADED_NOTICE.to_string()] } else { Vec::new() },
        diagnostics: diag,
        degraded,
    }
}

/// Plain-text layout of the student view.
pub fn render_text(report: &FeedbackReport) -> String {
    render_student_text(&report.student_view())
}

pub fn render_student_text(report: &StudentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Style feedback for {}", report.problem_id);
    let _ = writeln!(out, "Generated {}", report.generated_at.to_rfc3339_opts(SecondsFormat::Secs, true));
    for notice in &report.notices {
        let _ = writeln!(out, "\nNote: {notice}");
    }
    for section in &report.sections {
        let _ = writeln!(out, "\n{}", section.category.title());
        let _ = writeln!(out, "{}", "-".repeat(section.category.title().len()));
        for item in &section.items {
            match item.line {
                Some(line) => {
                    let _ = writeln!(out, "* line {line}: {}", item.message);
                }
                None => {
                    let _ = writeln!(out, "* {}", item.message);
                }
            }
            if let Some(s) = &item.suggestion {
                let _ = writeln!(out, "  Suggestion: {s}");
            }
        }
    }
    out
}
