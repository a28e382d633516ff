//! Text-generation backends behind one synchronous contract.
//!
//! * [`HttpBackend`] talks to an OpenAI-compatible chat-completion endpoint.
//! * [`ReplayBackend`] serves stored completions by request digest and never
//!   touches the network.
//! * [`ScriptedBackend`] hands out queued responses per schema id, for tests.
//!
//! [`Recording`] wraps any backend and writes every completion into a
//! [`ReplayStore`], which is how replay fixtures are produced.

mod http;
mod replay;
mod scripted;
pub mod structured;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig};
pub use replay::{Recording, ReplayBackend, ReplayStore};
pub use scripted::{ScriptEntry, ScriptedBackend};
pub use structured::{complete_structured, extract_json_object, parse_structured, Structured, StructuredOutput, StructuredOutputError};

pub const DEFAULT_MAX_OUTPUT: u32 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_output: u32,
    pub schema_id: String,
    pub model: String,
}

impl PromptRequest {
    pub fn new(model: impl Into<String>, schema_id: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            messages,
            temperature: 0.0,
            max_output: DEFAULT_MAX_OUTPUT,
            schema_id: schema_id.into(),
            model: model.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(BackendError::InvalidRequest("at least one user message is required".into()));
        }
        if self.messages.iter().any(|m| m.content.trim().is_empty()) {
            return Err(BackendError::InvalidRequest("message content must be non-empty".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        cache_key(self)
    }
}

/// SHA-256 over the canonical JSON of (model, temperature, schema id,
/// messages). Object keys are emitted in sorted order; message order is kept.
pub fn cache_key(request: &PromptRequest) -> String {
    let canonical = serde_json::json!({
        "messages": request
            .messages
            .iter()
            .map(|m| serde_json::json!({ "content": m.content, "role": m.role }))
            .collect::<Vec<_>>(),
        "model": request.model,
        "schema_id": request.schema_id,
        "temperature": request.temperature,
    });
    let bytes = serde_json::to_vec(&canonical).expect("canonical request serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Replay,
    Scripted,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
            BackendKind::Scripted => "scripted",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub backend: BackendKind,
    pub usage: Option<Usage>,
    pub request_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportClass {
    Timeout,
    RateLimit,
    ServerError,
    Other,
}

impl TransportClass {
    pub fn from_status(status: u16) -> Self {
        match status {
            429 => TransportClass::RateLimit,
            408 => TransportClass::Timeout,
            500..=599 => TransportClass::ServerError,
            _ => TransportClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub max_delay: Duration,
    pub retryable: Vec<TransportClass>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
            max_delay: Duration::from_secs(30),
            retryable: vec![TransportClass::Timeout, TransportClass::RateLimit, TransportClass::ServerError],
        }
    }
}

impl RetryPolicy {
    pub fn new(max_attempts: u32, base_delay: Duration, factor: f64) -> Result<Self, BackendError> {
        if max_attempts == 0 {
            return Err(BackendError::Config("retry policy needs max_attempts >= 1".into()));
        }
        Ok(Self {
            max_attempts,
            base_delay,
            factor,
            ..Self::default()
        })
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(attempt.saturating_sub(1) as i32);
        Duration::from_secs_f64(scaled.min(self.max_delay.as_secs_f64()))
    }

    pub fn is_retryable(&self, class: TransportClass) -> bool {
        self.retryable.contains(&class)
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend misconfigured: {0}")]
    Config(String),
    #[error("transport error after {attempts} attempt(s) ({class:?}): {message}")]
    Transport {
        class: TransportClass,
        attempts: u32,
        message: String,
    },
    #[error("replay store has no completion for digest {digest}")]
    CacheMiss { digest: String },
    #[error("script exhausted for schema `{schema_id}`")]
    ScriptExhausted { schema_id: String },
    #[error("replay store I/O on {path}: {source}")]
    Store {
        path: String,
        source: std::io::Error,
    },
}

/// Request and token tallies for one backend instance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub requests: u64,
    pub network_calls: u64,
    pub replay_hits: u64,
    pub recorded: u64,
    pub prompt_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Default)]
pub struct Counters {
    requests: AtomicU64,
    network_calls: AtomicU64,
    replay_hits: AtomicU64,
    recorded: AtomicU64,
    prompt_tokens: AtomicU64,
    output_tokens: AtomicU64,
}

impl Counters {
    pub fn request(&self) {
        self.requests.fetch_add(1, Ordering::Relaxed);
    }

    pub fn network_call(&self) {
        self.network_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn replay_hit(&self) {
        self.replay_hits.fetch_add(1, Ordering::Relaxed);
    }

    pub fn recorded(&self) {
        self.recorded.fetch_add(1, Ordering::Relaxed);
    }

    pub fn tokens(&self, usage: Option<Usage>) {
        if let Some(u) = usage {
            self.prompt_tokens.fetch_add(u.prompt_tokens, Ordering::Relaxed);
            self.output_tokens.fetch_add(u.output_tokens, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> UsageTotals {
        UsageTotals {
            requests: self.requests.load(Ordering::Relaxed),
            network_calls: self.network_calls.load(Ordering::Relaxed),
            replay_hits: self.replay_hits.load(Ordering::Relaxed),
            recorded: self.recorded.load(Ordering::Relaxed),
            prompt_tokens: self.prompt_tokens.load(Ordering::Relaxed),
            output_tokens: self.output_tokens.load(Ordering::Relaxed),
        }
    }
}

/// A completion source. Implementations are shared across worker threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError>;

    fn kind(&self) -> BackendKind;

    fn usage(&self) -> UsageTotals;

    /// Backends whose answers depend on call order (scripts) must be driven
    /// by a single worker.
    fn order_sensitive(&self) -> bool {
        false
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError> {
        (**self).complete(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn usage(&self) -> UsageTotals {
        (**self).usage()
    }

    fn order_sensitive(&self) -> bool {
        (**self).order_sensitive()
    }
}
