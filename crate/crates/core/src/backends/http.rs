use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{
    check_messages, BackendError, ChatBackend, ChatMessage, EmbeddingBackend, ScoringBackend,
};

/// Endpoint settings shared by the HTTP backends.
///
/// `url_env` and `api_key_env` name environment variables; when `url_env` is
/// set and present it overrides `url`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    #[serde(default)]
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url_env: Option<String>,
    #[serde(default)]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub initial_backoff_ms: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_attempts() -> u32 {
    5
}

fn default_backoff_ms() -> u64 {
    500
}

impl HttpConfig {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            url_env: None,
            model: model.into(),
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            max_attempts: default_max_attempts(),
            initial_backoff_ms: default_backoff_ms(),
        }
    }

    fn resolve_url(&self) -> Result<String, BackendError> {
        if let Some(var) = &self.url_env {
            if let Ok(url) = std::env::var(var) {
                return Ok(url);
            }
        }
        if self.url.is_empty() {
            return Err(BackendError::InvalidConfig("endpoint url is not set".into()));
        }
        Ok(self.url.clone())
    }

    fn api_key(&self) -> Result<Option<String>, BackendError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                BackendError::InvalidConfig(format!("environment variable {var} is not set"))
            }),
        }
    }
}

struct JsonClient {
    agent: Agent,
    config: HttpConfig,
}

impl JsonClient {
    fn new(config: HttpConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .into();
        Self { agent, config }
    }

    /// POSTs `body`, retrying 429 and 5xx responses with exponential backoff.
    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let url = self.config.resolve_url()?;
        let key = self.config.api_key()?;
        let attempts = self.config.max_attempts.max(1);
        let mut backoff = Duration::from_millis(self.config.initial_backoff_ms);
        for attempt in 1..=attempts {
            let mut request = self
                .agent
                .post(&url)
                .header("Content-Type", "application/json");
            if let Some(key) = &key {
                request = request.header("Authorization", &format!("Bearer {key}"));
            }
            let mut response = request
                .send_json(body)
                .map_err(|e| BackendError::Transport(e.to_string()))?;
            let status = response.status().as_u16();
            let retryable = status == 429 || (500..600).contains(&status);
            if (200..300).contains(&status) {
                let text = response
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| BackendError::Transport(e.to_string()))?;
                return serde_json::from_str(&text)
                    .map_err(|e| BackendError::MalformedResponse(e.to_string()));
            }
            if !retryable {
                return Err(BackendError::HttpStatus(status));
            }
            if attempt == attempts {
                return Err(if status == 429 {
                    BackendError::RateLimited { attempts }
                } else {
                    BackendError::HttpStatus(status)
                });
            }
            thread::sleep(backoff);
            backoff *= 2;
        }
        unreachable!("retry loop returns on the final attempt")
    }
}

/// OpenAI-compatible chat completion client: POST
/// `{model, messages, temperature}`, reply read from
/// `choices[0].message.content`.
pub struct HttpChat {
    client: JsonClient,
}

impl HttpChat {
    pub fn new(config: HttpConfig) -> Self {
        Self {
            client: JsonClient::new(config),
        }
    }
}

impl ChatBackend for HttpChat {
    fn complete(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, BackendError> {
        check_messages(messages)?;
        let body = json!({
            "model": self.client.config.model,
            "messages": messages,
            "temperature": temperature,
        });
        let response = self.client.post(&body)?;
        response
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::MalformedResponse("missing choices[0].message.content".into())
            })
    }
}

/// Scoring sidecar client: POST `{prompt, completion}` → `{nll}`.
pub struct HttpScorer {
    client: JsonClient,
}

impl HttpScorer {
    pub fn new(config: HttpConfig) -> Self {
        Self {
            client: JsonClient::new(config),
        }
    }
}

impl ScoringBackend for HttpScorer {
    fn negative_log_likelihood(
        &self,
        prompt: &str,
        completion: &str,
    ) -> Result<f64, BackendError> {
        let response = self
            .client
            .post(&json!({ "prompt": prompt, "completion": completion }))?;
        let nll = response
            .get("nll")
            .and_then(Value::as_f64)
            .ok_or_else(|| BackendError::MalformedResponse("missing numeric nll".into()))?;
        if !(nll.is_finite() && nll >= 0.0) {
            return Err(BackendError::MalformedResponse(format!(
                "nll must be finite and non-negative, got {nll}"
            )));
        }
        Ok(nll)
    }
}

/// OpenAI-compatible embeddings client: POST `{model, input}`, vector read
/// from `data[0].embedding`.
pub struct HttpEmbedder {
    client: JsonClient,
    dimension: usize,
}

impl HttpEmbedder {
    pub fn new(config: HttpConfig, dimension: usize) -> Self {
        Self {
            client: JsonClient::new(config),
            dimension,
        }
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.is_empty() {
            return Err(BackendError::EmptyText);
        }
        let response = self.client.post(&json!({
            "model": self.client.config.model,
            "input": text,
        }))?;
        let values = response
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::MalformedResponse("missing data[0].embedding".into()))?;
        values
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| BackendError::MalformedResponse("non-numeric embedding".into()))
            })
            .collect()
    }

    fn dimension(&self) -> usize {
        self.dimension
    }
}
