//! Prompt construction, transport and validation for the two model-backed
//! feedback categories: identifier names and comments.

mod http;
mod mock;
mod validate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{comment_line_map, identifier_value_map, ProgramFacts, SourceProgram};

pub use http::HttpTransport;
pub use mock::{FaultMode, MockTransport};
pub use validate::{
    check_shape, validate_comment_response, validate_identifier_response, CommentItems, CommentSuggestion,
    CommentValidation, DroppedItem, IdentifierItem, IdentifierValidation, PositiveComment, SchemaError,
    MAX_COMMENT_SUGGESTIONS, MAX_TEXT_LEN,
};

const IDENTIFIER_TEMPLATE: &str = include_str!("../../prompts/identifiers.txt");
const COMMENT_TEMPLATE: &str = include_str!("../../prompts/comments.txt");

pub const IDENTIFIER_SCHEMA: &str = r#"{
  "identifiers": [
    {
      "name": string,            // an identifier that appears in the program
      "line": integer,           // line where the identifier is first assigned, 1-based
      "score": integer,          // 1 (very unclear) to 10 (very clear)
      "misleading_type": boolean,// true when the name contradicts the type of value stored
      "suggested_name": string,  // lowercase snake_case, a valid identifier, different from name
      "explanation": string      // short reason the suggested name is clearer
    }
  ]
}"#;

pub const COMMENT_SCHEMA: &str = r#"{
  "positive": {                  // optional
    "line": integer,             // line of an existing comment, 1-based
    "text": string               // one short piece of praise
  },
  "suggestions": [               // at most 2 entries
    { "line": integer, "text": string }
  ]
}"#;

const NO_COMMENTS_RULE: &str =
    "The program has no comments, so the \"positive\" key MUST be omitted from the response.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    Identifiers,
    Comments,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "category", content = "entries", rename_all = "snake_case")]
pub enum AuxPayload {
    /// Variable name to the source text of every expression assigned to it.
    Identifiers(IndexMap<String, Vec<String>>),
    /// Line number to the text of the comment on that line.
    Comments(BTreeMap<usize, String>),
}

impl AuxPayload {
    pub fn len(&self) -> usize {
        match self {
            AuxPayload::Identifiers(m) => m.len(),
            AuxPayload::Comments(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Everything sent to the model for one category. Holds only program text
/// and facts derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub category: PromptCategory,
    pub instructions: String,
    pub schema_description: String,
    pub code_text: String,
    pub aux_payload: AuxPayload,
}

impl PromptPayload {
    /// The payload as the single text prompt a transport sends.
    pub fn render(&self) -> String {
        let numbered: String = self
            .code_text
            .lines()
            .enumerate()
            .map(|(i, l)| format!("{:>3}: {l}\n", i + 1))
            .collect();
        let (aux_title, aux_json) = match &self.aux_payload {
            AuxPayload::Identifiers(m) => ("Values assigned to each variable", serde_json::to_string_pretty(m)),
            AuxPayload::Comments(m) => ("Existing comments by line number", serde_json::to_string_pretty(m)),
        };
        format!(
            "{}\nJSON schema:\n{}\n\nProgram:\n{}\n{}:\n{}\n",
            self.instructions.trim_end(),
            self.schema_description,
            numbered,
            aux_title,
            aux_json.expect("string maps always serialize")
        )
    }
}

/// Instruction texts for both prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub identifiers: String,
    pub comments: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self { identifiers: IDENTIFIER_TEMPLATE.to_string(), comments: COMMENT_TEMPLATE.to_string() }
    }
}

impl PromptTemplates {
    /// Reads `identifiers.txt` and `comments.txt` from `dir`.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        Ok(Self {
            identifiers: std::fs::read_to_string(dir.join("identifiers.txt"))?,
            comments: std::fs::read_to_string(dir.join("comments.txt"))?,
        })
    }
}

pub fn build_identifier_prompt(facts: &ProgramFacts, source: &SourceProgram) -> PromptPayload {
    build_identifier_prompt_with(&PromptTemplates::default(), facts, source)
}

pub fn build_identifier_prompt_with(
    templates: &PromptTemplates,
    facts: &ProgramFacts,
    source: &SourceProgram,
) -> PromptPayload {
    PromptPayload {
        category: PromptCategory::Identifiers,
        instructions: templates.identifiers.clone(),
        schema_description: IDENTIFIER_SCHEMA.to_string(),
        code_text: source.text().to_string(),
        aux_payload: AuxPayload::Identifiers(identifier_value_map(facts)),
    }
}

pub fn build_comment_prompt(facts: &ProgramFacts, source: &SourceProgram) -> PromptPayload {
    build_comment_prompt_with(&PromptTemplates::default(), facts, source)
}

pub fn build_comment_prompt_with(
    templates: &PromptTemplates,
    facts: &ProgramFacts,
    source: &SourceProgram,
) -> PromptPayload {
    let comments = comment_line_map(facts);
    let schema_description = if comments.is_empty() {
        format!("{COMMENT_SCHEMA}\n{NO_COMMENTS_RULE}")
    } else {
        COMMENT_SCHEMA.to_string()
    };
    PromptPayload {
        category: PromptCategory::Comments,
        instructions: templates.comments.clone(),
        schema_description,
        code_text: source.text().to_string(),
        aux_payload: AuxPayload::Comments(comments),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("transport not configured: {0}")]
    Config(String),
    #[error("unusable response: {0}")]
    BadResponse(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, payload: &PromptPayload) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportResult {
    pub raw_text: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    /// At least 1.
    pub attempt_count: u32,
}

mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LlmError {
    #[error("transport failed after {attempts} attempt(s): {error}")]
    Transport { error: TransportError, attempts: u32 },
    #[error("no valid response after {attempts} attempts: {last_error}")]
    ExhaustedRetries { attempts: u32, last_error: SchemaError },
}

impl LlmError {
    pub fn attempts(&self) -> u32 {
        match self {
            LlmError::Transport { attempts, .. } | LlmError::ExhaustedRetries { attempts, .. } => *attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Extra attempts after the first when a response is not schema-valid JSON.
    pub max_retries: u32,
    /// Items scoring at or below this are shown to the student.
    pub surface_threshold: u8,
    pub timeout_secs: u64,
    /// Directory holding `identifiers.txt` and `comments.txt`; built-in texts when unset.
    pub prompt_dir: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self { max_retries: 2, surface_threshold: 6, timeout_secs: 30, prompt_dir: None }
    }
}

/// One logical request: resends while the reply fails JSON or shape checks,
/// up to `max_retries` extra attempts. Transport errors are not retried.
pub fn request_feedback(
    payload: &PromptPayload,
    transport: &dyn Transport,
    max_retries: u32,
) -> Result<TransportResult, LlmError> {
    let started = Instant::now();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let raw = transport
            .send(payload)
            .map_err(|error| LlmError::Transport { error, attempts })?;
        match check_shape(payload.category, &raw) {
            Ok(_) => {
                return Ok(TransportResult { raw_text: raw, latency: started.elapsed(), attempt_count: attempts })
            }
            Err(err) if attempts > max_retries => {
                return Err(LlmError::ExhaustedRetries { attempts, last_error: err })
            }
            Err(err) => {
                tracing::warn!(category = ?payload.category, attempt = attempts, %err, "invalid model response, retrying");
            }
        }
    }
}

/// Outcome of one category: the validated items or the reason it fell back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryOutcome<T> {
    pub result: Result<T, LlmError>,
    pub attempt_count: u32,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmFeedback {
    pub identifiers: CategoryOutcome<IdentifierValidation>,
    pub comments: CategoryOutcome<CommentValidation>,
}

fn run_category<T>(
    payload: &PromptPayload,
    transport: &dyn Transport,
    max_retries: u32,
    validate: impl FnOnce(&str) -> Result<T, SchemaError>,
) -> CategoryOutcome<T> {
    let started = Instant::now();
    let (result, attempt_count) = match request_feedback(payload, transport, max_retries) {
        Ok(res) => {
            // check_shape already accepted this text, so validation cannot fail on shape.
            let attempts = res.attempt_count;
            let validated = validate(&res.raw_text)
                .map_err(|last_error| LlmError::ExhaustedRetries { attempts, last_error });
            (validated, attempts)
        }
        Err(e) => {
            tracing::warn!(category = ?payload.category, error = %e, "falling back to static feedback");
            let attempts = e.attempts();
            (Err(e), attempts)
        }
    };
    CategoryOutcome { result, attempt_count, latency_ms: started.elapsed().as_millis() as u64 }
}

/// Sends both prompts concurrently and validates each reply against `facts`.
pub fn gather_llm_feedback(
    facts: &ProgramFacts,
    source: &SourceProgram,
    transport: &dyn Transport,
    templates: &PromptTemplates,
    max_retries: u32,
) -> LlmFeedback {
    let id_payload = build_identifier_prompt_with(templates, facts, source);
    let comment_payload = build_comment_prompt_with(templates, facts, source);
    std::thread::scope(|s| {
        let ids = s.spawn(|| {
            run_category(&id_payload, transport, max_retries, |raw| validate_identifier_response(raw, facts))
        });
        let comments =
            run_category(&comment_payload, transport, max_retries, |raw| validate_comment_response(raw, facts));
        LlmFeedback { identifiers: ids.join().expect("identifier request panicked"), comments }
    })
}
