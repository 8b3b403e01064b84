use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, Usage};
use crate::http::{build_client, post_json, HttpFailure, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    /// `POST {endpoint}` with `prompt`, reads `choices[].text`.
    #[default]
    Completions,
    /// `POST {endpoint}` with a single user message, reads `choices[].message.content`.
    Chat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    pub api_style: ApiStyle,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub max_concurrency: usize,
    pub supports_n: bool,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/completions".into(),
            model: "codellama-7b-python".into(),
            api_style: ApiStyle::Completions,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            max_concurrency: 4,
            supports_n: true,
        }
    }
}

/// OpenAI-compatible completion client.
pub struct HttpBackend {
    config: HttpBackendConfig,
    api_key: Option<String>,
    client: Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig, api_key: Option<String>) -> Result<Self, LlmError> {
        let client = build_client(Duration::from_secs(config.timeout_secs)).map_err(LlmError::Transport)?;
        Ok(Self { config, api_key, client })
    }

    fn body(&self, request: &LlmRequest) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "temperature": request.temperature,
            "n": request.n_samples,
            "max_tokens": request.max_tokens,
        });
        match self.config.api_style {
            ApiStyle::Completions => body["prompt"] = json!(request.prompt),
            ApiStyle::Chat => body["messages"] = json!([{"role": "user", "content": request.prompt}]),
        }
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        body
    }
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
    #[serde(default)]
    error: Option<Value>,
}

#[derive(Deserialize)]
struct WireChoice {
    #[serde(default)]
    index: Option<usize>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<WireMessage>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Extracts completions from a provider reply, ordered by choice index.
pub(crate) fn parse_wire_response(body: &str, style: ApiStyle) -> Result<LlmResponse, LlmError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| LlmError::BackendRefusal(format!("unparseable response: {e}")))?;
    if let Some(err) = wire.error {
        return Err(LlmError::BackendRefusal(format!("provider error: {err}")));
    }
    let mut choices: Vec<(usize, String)> = Vec::with_capacity(wire.choices.len());
    for (pos, choice) in wire.choices.into_iter().enumerate() {
        let text = match style {
            ApiStyle::Completions => choice.text,
            ApiStyle::Chat => choice.message.and_then(|m| m.content),
        }
        .ok_or_else(|| LlmError::BackendRefusal(format!("choice {pos} carries no text")))?;
        choices.push((choice.index.unwrap_or(pos), text));
    }
    choices.sort_by_key(|(i, _)| *i);
    Ok(LlmResponse { completions: choices.into_iter().map(|(_, t)| t).collect(), usage: wire.usage })
}

fn map_failure(failure: HttpFailure) -> LlmError {
    match failure {
        HttpFailure::Timeout => LlmError::Timeout,
        HttpFailure::Transport(msg) => LlmError::Transport(msg),
        HttpFailure::Status { code: 401 | 403, body } => LlmError::AuthFailure(body),
        HttpFailure::Status { code, body } if code == 429 || code >= 500 => {
            LlmError::Transport(format!("HTTP {code}: {body}"))
        }
        HttpFailure::Status { code, body } => LlmError::BackendRefusal(format!("HTTP {code}: {body}")),
    }
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> String {
        format!("{}@{}", self.config.model, self.config.endpoint)
    }

    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let body = self.body(request);
        let text = post_json(&self.client, &self.config.endpoint, self.api_key.as_deref(), &body, &self.config.retry)
            .map_err(map_failure)?;
        parse_wire_response(&text, self.config.api_style)
    }

    fn supports_n(&self) -> bool {
        self.config.supports_n
    }

    fn max_concurrency(&self) -> usize {
        self.config.max_concurrency
    }
}
