//! Deterministic style rules: constants and magic numbers, decomposition.

mod constants;
mod decomposition;

use serde::{Deserialize, Serialize};

pub use constants::analyze_constants;
pub use decomposition::{analyze_decomposition, common_runs, CommonRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    UnusedConstant,
    MagicNumber,
    ConstantUsedAsVariable,
    LowercaseConstant,
    LongFunction,
    DuplicateBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpan {
    pub function: String,
    pub start_line: usize,
    pub end_line: usize,
}

/// Two equally long runs of identical normalized lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub first: BlockSpan,
    pub second: BlockSpan,
    /// Number of normalized lines in each run.
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleFinding {
    pub kind: FindingKind,
    pub line: usize,
    /// Name, literal spelling, or function name(s) the finding is about.
    pub subject: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate: Option<DuplicatePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    /// Literals that never count as magic numbers.
    pub magic_exemptions: Vec<f64>,
    /// A function is long when its body has more code lines than this.
    pub long_function_lines: usize,
    /// Shortest run of shared normalized lines reported as a duplicate.
    pub duplicate_min_lines: usize,
    pub max_findings_per_category: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            magic_exemptions: vec![0.0, 1.0, -1.0],
            long_function_lines: 15,
            duplicate_min_lines: 5,
            max_findings_per_category: 10,
        }
    }
}

impl RuleConfig {
    pub fn is_exempt(&self, value: f64) -> bool {
        self.magic_exemptions.iter().any(|&e| e == value)
    }
}
