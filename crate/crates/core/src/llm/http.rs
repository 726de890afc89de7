use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ureq::Agent;

use super::{Completion, LlmBackend, LlmError, LlmRequest, Usage};

/// Live chat-completion endpoint settings. The credential itself is read
/// from the environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key_env: String,
    pub auth_header: String,
    /// Prepended to the key in the auth header, e.g. `"Bearer "`.
    pub auth_prefix: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            auth_header: "Authorization".into(),
            auth_prefix: "Bearer ".into(),
            timeout_secs: 600,
            retries: 3,
            backoff_base_ms: 2000,
            backoff_max_ms: 60_000,
        }
    }
}

/// Delay before retry `attempt` (0-based): `base * 2^attempt`, capped.
pub fn backoff_delay(attempt: u32, base: Duration, max: Duration) -> Duration {
    base.saturating_mul(2u32.saturating_pow(attempt)).min(max)
}

fn retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429 | 500 | 502 | 503 | 504)
}

pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    agent: Agent,
}

impl HttpBackend {
    /// Reads the credential from the environment.
    pub fn from_env(config: HttpConfig) -> Result<Self, LlmError> {
        let key = std::env::var(&config.api_key_env).map_err(|_| {
            LlmError::Auth(format!("environment variable {} is not set", config.api_key_env))
        })?;
        Ok(Self::with_key(config, key))
    }

    pub fn with_key(config: HttpConfig, api_key: String) -> Self {
        let agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        HttpBackend {
            config,
            api_key,
            agent,
        }
    }

    fn body(request: &LlmRequest) -> Value {
        let mut messages = Vec::new();
        if !request.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": request.system_text}));
        }
        messages.push(json!({"role": "user", "content": request.user_text}));
        json!({
            "model": request.model_id,
            "messages": messages,
            "reasoning_effort": request.reasoning_effort.as_str(),
            "max_completion_tokens": request.max_output_tokens,
        })
    }

    /// One HTTP exchange. `Ok(Err(..))` marks a failure worth retrying.
    fn attempt(&self, body: &Value) -> Result<Result<Completion, LlmError>, LlmError> {
        let auth = format!("{}{}", self.config.auth_prefix, self.api_key);
        let resp = self
            .agent
            .post(&self.config.endpoint)
            .header(self.config.auth_header.as_str(), auth.as_str())
            .send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Ok(Err(LlmError::Transport(e.to_string()))),
        };
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| LlmError::Transport(e.to_string()));
        match status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(format!("HTTP {status}"))),
            s if retryable_status(s) => {
                return Ok(Err(LlmError::Transport(format!("HTTP {s}"))));
            }
            s => {
                let detail = text.unwrap_or_default();
                return Err(LlmError::Transport(format!("HTTP {s}: {detail}")));
            }
        }
        let text = match text {
            Ok(t) => t,
            Err(e) => return Ok(Err(e)),
        };
        parse_completion(&text).map(Ok)
    }
}

/// Pulls the first choice's message text and token usage out of a
/// chat-completion response body.
pub(crate) fn parse_completion(body: &str) -> Result<Completion, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Protocol(e.to_string()))?;
    let raw_text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Protocol("no choices[0].message.content".into()))?
        .to_string();
    let count = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    Ok(Completion {
        raw_text,
        usage: Usage {
            prompt_tokens: count("/usage/prompt_tokens"),
            completion_tokens: count("/usage/completion_tokens"),
        },
    })
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<Completion, LlmError> {
        let body = Self::body(request);
        let base = Duration::from_millis(self.config.backoff_base_ms);
        let max = Duration::from_millis(self.config.backoff_max_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&body)? {
                Ok(c) => return Ok(c),
                Err(e) if attempt >= self.config.retries => return Err(e),
                Err(e) => {
                    let delay = backoff_delay(attempt, base, max);
                    log::warn!(
                        "request {}: {e}; retrying in {delay:?}",
                        request.request_tag
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
            }
        }
    }
}
