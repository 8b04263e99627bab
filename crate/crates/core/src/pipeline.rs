//! Source program to feedback report: parse, run static rules, ask the
//! model-backed categories, assemble.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::frontend::{parse_program, SourceProgram, SyntaxError};
use crate::llm::{gather_llm_feedback, LlmConfig, PromptTemplates, Transport};
use crate::report::{assemble_report, FeedbackReport, ReportMeta};
use crate::rules::{analyze_constants, analyze_decomposition, RuleConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub rules: RuleConfig,
    pub llm: LlmConfig,
}

#[derive(Clone)]
pub struct FeedbackEngine {
    config: FeedbackConfig,
    templates: PromptTemplates,
    transport: Arc<dyn Transport>,
}

impl std::fmt::Debug for FeedbackEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeedbackEngine").field("config", &self.config).finish_non_exhaustive()
    }
}

impl FeedbackEngine {
    pub fn new(config: FeedbackConfig, templates: PromptTemplates, transport: Arc<dyn Transport>) -> Self {
        Self { config, templates, transport }
    }

    pub fn config(&self) -> &FeedbackConfig {
        &self.config
    }

    /// Fails only on a syntax error; model failures degrade the report instead.
    pub fn generate(&self, source: &SourceProgram, generated_at: DateTime<Utc>) -> Result<FeedbackReport, SyntaxError> {
        let facts = parse_program(source)?;
        let mut findings = analyze_constants(&facts, &self.config.rules);
        findings.extend(analyze_decomposition(&facts, &self.config.rules));
        let llm = gather_llm_feedback(&facts, source, self.transport.as_ref(), &self.templates, self.config.llm.max_retries);
        let meta = ReportMeta {
            problem_id: source.problem_id().to_string(),
            generated_at,
            surface_threshold: self.config.llm.surface_threshold,
        };
        Ok(assemble_report(&findings, &llm, &meta))
    }
}
