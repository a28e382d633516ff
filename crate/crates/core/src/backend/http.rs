use std::time::Duration;

use serde_json::{json, Value};
use tracing::{debug, warn};

use super::{
    Backend, BackendError, BackendKind, Completion, Counters, PromptRequest, RetryPolicy, TransportClass, Usage,
    UsageTotals,
};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub api_key: String,
    pub timeout: Duration,
    pub retry: RetryPolicy,
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
        }
    }
}

/// OpenAI-compatible chat-completion client.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    counters: Counters,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        if config.endpoint.trim().is_empty() {
            return Err(BackendError::Config("http backend needs an endpoint".into()));
        }
        if config.api_key.is_empty() {
            return Err(BackendError::Config("http backend needs an api key".into()));
        }
        if config.retry.max_attempts == 0 {
            return Err(BackendError::Config("retry policy needs max_attempts >= 1".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            counters: Counters::default(),
        })
    }

    fn body(request: &PromptRequest) -> Value {
        json!({
            "model": request.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        })
    }

    fn attempt(&self, body: &Value) -> Result<(String, Option<Usage>), (TransportClass, String)> {
        self.counters.network_call();
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(body)
            .map_err(|e| {
                let class = match e {
                    ureq::Error::Timeout(_) => TransportClass::Timeout,
                    ureq::Error::Io(ref io) if io.kind() == std::io::ErrorKind::TimedOut => TransportClass::Timeout,
                    _ => TransportClass::Other,
                };
                (class, e.to_string())
            })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err((TransportClass::from_status(status), format!("HTTP {status}: {}", truncate(&text, 300))));
        }
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| (TransportClass::Other, format!("unreadable response body: {e}")))?;
        parse_chat_response(&value).map_err(|m| (TransportClass::Other, m))
    }
}

/// Pulls the first choice's message content and token usage from a
/// chat-completion response.
pub(crate) fn parse_chat_response(value: &Value) -> Result<(String, Option<Usage>), String> {
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())?;
    let usage = value.get("usage").map(|u| Usage {
        prompt_tokens: u.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0),
        output_tokens: u.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0),
    });
    Ok((text.to_string(), usage))
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &PromptRequest) -> Result<Completion, BackendError> {
        request.validate()?;
        self.counters.request();
        let body = Self::body(request);
        let policy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.attempt(&body) {
                Ok((text, usage)) => {
                    self.counters.tokens(usage);
                    return Ok(Completion {
                        text,
                        backend: BackendKind::Http,
                        usage,
                        request_digest: request.digest(),
                    });
                }
                Err((class, message)) => {
                    if attempt >= policy.max_attempts || !policy.is_retryable(class) {
                        return Err(BackendError::Transport {
                            class,
                            attempts: attempt,
                            message,
                        });
                    }
                    let delay = policy.delay(attempt);
                    warn!(attempt, ?class, %message, "retrying completion in {delay:?}");
                    std::thread::sleep(delay);
                    debug!(attempt = attempt + 1, "reissuing identical payload");
                }
            }
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn usage(&self) -> UsageTotals {
        self.counters.snapshot()
    }
}
