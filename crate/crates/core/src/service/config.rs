use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration as StdDuration;

use chrono::Duration;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::groups::{GroupWeights, InvalidWeights};
use super::release::{ReleaseSchedule, ReleaseScheduleConfig, ScheduleError};
use super::ServiceSettings;
use crate::llm::{HttpTransport, MockTransport, PromptTemplates, Transport, TransportError};
use crate::pipeline::{FeedbackConfig, FeedbackEngine};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    #[default]
    Mock,
    Live,
}

impl std::str::FromStr for TransportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(TransportKind::Mock),
            "live" => Ok(TransportKind::Live),
            other => Err(format!("unknown transport {other:?}, expected mock or live")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Weights(#[from] InvalidWeights),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("cannot read prompt templates from {path}: {source}")]
    Prompts { path: PathBuf, source: std::io::Error },
}

/// Everything the service and the CLI read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub seed: u64,
    pub cooldown_seconds: u64,
    pub port: u16,
    pub log_path: Option<PathBuf>,
    pub transport: TransportKind,
    pub weights: GroupWeights,
    pub release: ReleaseScheduleConfig,
    pub feedback: FeedbackConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cooldown_seconds: 600,
            port: 8080,
            log_path: None,
            transport: TransportKind::Mock,
            weights: GroupWeights::default(),
            release: ReleaseScheduleConfig::default(),
            feedback: FeedbackConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn settings(&self) -> Result<ServiceSettings, ConfigError> {
        self.weights.validate()?;
        Ok(ServiceSettings {
            weights: self.weights,
            seed: self.seed,
            cooldown: Duration::seconds(self.cooldown_seconds as i64),
            release: ReleaseSchedule::try_from(&self.release)?,
        })
    }

    pub fn build_transport(&self) -> Result<Arc<dyn Transport>, ConfigError> {
        Ok(match self.transport {
            TransportKind::Mock => Arc::new(MockTransport::new()),
            TransportKind::Live => {
                Arc::new(HttpTransport::from_env(StdDuration::from_secs(self.feedback.llm.timeout_secs))?)
            }
        })
    }

    pub fn templates(&self) -> Result<PromptTemplates, ConfigError> {
        match &self.feedback.llm.prompt_dir {
            None => Ok(PromptTemplates::default()),
            Some(dir) => PromptTemplates::load_dir(dir).map_err(|source| ConfigError::Prompts { path: dir.clone(), source }),
        }
    }

    pub fn build_engine(&self) -> Result<FeedbackEngine, ConfigError> {
        Ok(FeedbackEngine::new(self.feedback.clone(), self.templates()?, self.build_transport()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = ServiceConfig::from_toml_str(
            r#"
seed = 7
cooldown_seconds = 300
transport = "mock"

[weights]
delay = 0.2
realtime = 0.4
nudge = 0.4

[release]
weekday = "Tue"
time = "08:30"
timezone = "Europe/Berlin"

[feedback.rules]
max_findings_per_category = 3

[feedback.llm]
max_retries = 1
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.feedback.rules.max_findings_per_category, 3);
        assert_eq!(cfg.feedback.rules.long_function_lines, 15);
        assert_eq!(cfg.feedback.llm.max_retries, 1);
        let s = cfg.settings().unwrap();
        assert_eq!(s.cooldown, Duration::seconds(300));
        assert_eq!(s.release.weekday, chrono::Weekday::Tue);
    }

    #[test]
    fn rejects_bad_weights_and_unknown_keys() {
        let cfg = ServiceConfig::from_toml_str("[weights]\ndelay = 0.5\nrealtime = 0.5\nnudge = 0.5\n").unwrap();
        assert!(matches!(cfg.settings(), Err(ConfigError::Weights(_))));
        assert!(ServiceConfig::from_toml_str("colour = 3\n").is_err());
    }

    #[test]
    fn defaults() {
        let cfg = ServiceConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        assert_eq!(cfg.settings().unwrap(), ServiceSettings::default());
    }
}
