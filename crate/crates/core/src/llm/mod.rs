//! Chat-completion gateway for program generation.
//!
//! A [`Gateway`] wraps one [`LlmBackend`]: the live HTTP backend, the
//! offline cassette replay backend, or any closure. It caps in-flight
//! requests, extracts the program from the reply, and can record every
//! exchange to a cassette for later replay.

mod cassette;
mod http;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{Cassette, CassetteEntry, ReplayBackend};
pub use http::{backoff_delay, HttpBackend, HttpConfig};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("completion was empty")]
    EmptyCompletion,
    #[error("no cassette entry for request {tag:?} (digest {digest})")]
    CassetteMiss { tag: String, digest: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("cassette I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    #[default]
    High,
}

impl ReasoningEffort {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

impl fmt::Display for ReasoningEffort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningEffort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(ReasoningEffort::Low),
            "medium" => Ok(ReasoningEffort::Medium),
            "high" => Ok(ReasoningEffort::High),
            _ => Err(format!("unknown reasoning effort {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub system_text: String,
    pub user_text: String,
    pub reasoning_effort: ReasoningEffort,
    pub max_output_tokens: u32,
    /// Caller-chosen label for logs and errors; not part of the digest.
    pub request_tag: String,
}

impl LlmRequest {
    /// SHA-256 over the fields that change the meaning of the request.
    /// `max_output_tokens` and `request_tag` are left out.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for field in [
            self.model_id.as_str(),
            self.system_text.as_str(),
            self.user_text.as_str(),
            self.reasoning_effort.as_str(),
        ] {
            h.update((field.len() as u64).to_le_bytes());
            h.update(field.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// What a backend hands back before program extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub raw_text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmResponse {
    pub program_text: String,
    pub raw_text: String,
    pub usage: Usage,
    pub latency: Duration,
}

impl LlmResponse {
    /// True when extraction found nothing to run (e.g. an empty fence).
    pub fn is_empty_program(&self) -> bool {
        self.program_text.trim().is_empty()
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<Completion, LlmError>;
}

impl<F> LlmBackend for F
where
    F: Fn(&LlmRequest) -> Result<Completion, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<Completion, LlmError> {
        self(request)
    }
}

/// Program text of a reply: the body of the largest fenced code block, or
/// the whole reply when it has no fences. An unterminated fence runs to the
/// end of the reply.
pub fn extract_program(raw: &str) -> String {
    let mut best: Option<String> = None;
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        let is_fence = line.trim_start().starts_with("```");
        match (&mut current, is_fence) {
            (None, true) => current = Some(Vec::new()),
            (Some(body), true) => {
                let text = body.join("\n");
                if best.as_ref().is_none_or(|b| text.len() > b.len()) {
                    best = Some(text);
                }
                current = None;
            }
            (Some(body), false) => body.push(line),
            (None, false) => {}
        }
    }
    if let Some(body) = current {
        let text = body.join("\n");
        if best.as_ref().is_none_or(|b| text.len() > b.len()) {
            best = Some(text);
        }
    }
    best.unwrap_or_else(|| raw.to_string())
}

/// Counting semaphore bounding concurrent backend calls.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    recorder: Option<Arc<Cassette>>,
    limiter: Limiter,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Gateway {
            backend,
            recorder: None,
            limiter: Limiter::new(8),
        }
    }

    /// Appends every successful exchange to `cassette`.
    pub fn recording_to(mut self, cassette: Arc<Cassette>) -> Self {
        self.recorder = Some(cassette);
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    pub fn generate(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let completion = {
            let _permit = self.limiter.acquire();
            let start = Instant::now();
            let completion = self.backend.complete(request)?;
            (completion, start.elapsed())
        };
        let (completion, latency) = completion;
        if completion.raw_text.trim().is_empty() {
            return Err(LlmError::EmptyCompletion);
        }
        if let Some(cassette) = &self.recorder {
            cassette.record(request, &completion)?;
        }
        Ok(LlmResponse {
            program_text: extract_program(&completion.raw_text),
            raw_text: completion.raw_text,
            usage: completion.usage,
            latency,
        })
    }
}
