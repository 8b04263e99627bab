use std::time::Duration;

use serde_json::{json, Value};

use super::{PromptPayload, Transport, TransportError};

pub const ENDPOINT_VAR: &str = "STYLEFB_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "STYLEFB_LLM_API_KEY";
pub const MODEL_VAR: &str = "STYLEFB_LLM_MODEL";
const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

/// Chat-completions transport for an OpenAI-compatible endpoint.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
    model: String,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport").field("endpoint", &self.endpoint).field("model", &self.model).finish()
    }
}

impl HttpTransport {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let endpoint = endpoint.into();
        match reqwest::Url::parse(&endpoint) {
            Ok(url) if matches!(url.scheme(), "http" | "https") => {}
            _ => return Err(TransportError::Config(format!("{ENDPOINT_VAR} must be an http(s) URL, got {endpoint:?}"))),
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Config(e.to_string()))?;
        Ok(Self { client, endpoint, api_key, model: model.into() })
    }

    /// Reads the endpoint, key and model from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, TransportError> {
        let endpoint =
            std::env::var(ENDPOINT_VAR).map_err(|_| TransportError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Self::new(endpoint, api_key, model, timeout)
    }
}

impl Transport for HttpTransport {
    fn send(&self, payload: &PromptPayload) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "response_format": { "type": "json_object" },
            "messages": [{ "role": "user", "content": payload.render() }],
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::BadResponse(format!("HTTP {status}")));
        }
        let value: Value = resp.json().map_err(|e| TransportError::BadResponse(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::BadResponse("no message content".into()))
    }
}
