use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::{json, Value};

use super::TokenUsage;

pub const DEFAULT_MODEL: &str = "gpt-4-0613";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const API_KEY_ENV: &str = "EVOLVE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportReply {
    pub text: String,
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportFailure {
    /// Network errors, HTTP 5xx and unreadable bodies.
    Retryable(String),
    /// HTTP 401/403.
    Auth(u16),
    /// Other client errors; retrying will not help.
    Rejected(u16, String),
}

/// One single-turn chat completion.
pub trait ChatTransport: Send + Sync {
    fn send(&self, model: &str, prompt: &str) -> Result<TransportReply, TransportFailure>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt` (1-based, so attempt 2 waits `base`).
    pub fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(2))
    }
}

/// Chat-completions over HTTP. No sampling parameters are sent, so the
/// provider defaults apply.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: &str, api_key: impl Into<String>, timeout: Duration) -> Self {
        Self {
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key: api_key.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// Reads the credential from `EVOLVE_API_KEY`.
    pub fn from_env(base_url: &str, timeout: Duration) -> Result<Self, String> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| format!("{API_KEY_ENV} is not set"))?;
        Ok(Self::new(base_url, key, timeout))
    }

    pub fn request_body(model: &str, prompt: &str) -> Value {
        json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

impl ChatTransport for HttpTransport {
    fn send(&self, model: &str, prompt: &str) -> Result<TransportReply, TransportFailure> {
        let response = self
            .agent
            .post(&self.endpoint)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(Self::request_body(model, prompt));
        let body: Value = match response {
            Ok(r) => r
                .into_json()
                .map_err(|e| TransportFailure::Retryable(format!("unreadable body: {e}")))?,
            Err(ureq::Error::Status(code @ (401 | 403), _)) => return Err(TransportFailure::Auth(code)),
            Err(ureq::Error::Status(code, r)) if code >= 500 => {
                return Err(TransportFailure::Retryable(format!("HTTP {code}: {}", r.into_string().unwrap_or_default())))
            }
            Err(ureq::Error::Status(code, r)) => {
                return Err(TransportFailure::Rejected(code, r.into_string().unwrap_or_default()))
            }
            Err(ureq::Error::Transport(t)) => return Err(TransportFailure::Retryable(t.to_string())),
        };
        let text = body["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportFailure::Retryable("response has no choices[0].message.content".into()))?
            .to_string();
        let usage = match (body["usage"]["prompt_tokens"].as_u64(), body["usage"]["completion_tokens"].as_u64()) {
            (Some(prompt_tokens), Some(completion_tokens)) => Some(TokenUsage {
                prompt_tokens,
                completion_tokens,
            }),
            _ => None,
        };
        Ok(TransportReply { text, usage })
    }
}

/// Canned replies in order, for examples and tests that stand in for a model.
#[derive(Default)]
pub struct ScriptedTransport {
    replies: Mutex<VecDeque<Result<String, TransportFailure>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedTransport {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self {
            replies: Mutex::new(replies.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn push_reply(&self, text: impl Into<String>) {
        self.replies.lock().unwrap().push_back(Ok(text.into()));
    }

    pub fn push_failure(&self, failure: TransportFailure) {
        self.replies.lock().unwrap().push_back(Err(failure));
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl ChatTransport for ScriptedTransport {
    fn send(&self, _model: &str, prompt: &str) -> Result<TransportReply, TransportFailure> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        let next = self.replies.lock().unwrap().pop_front();
        match next {
            Some(Ok(text)) => Ok(TransportReply { text, usage: None }),
            Some(Err(f)) => Err(f),
            None => Err(TransportFailure::Rejected(0, "scripted transport has no replies left".into())),
        }
    }
}

impl<T: ChatTransport + ?Sized> ChatTransport for std::sync::Arc<T> {
    fn send(&self, model: &str, prompt: &str) -> Result<TransportReply, TransportFailure> {
        (**self).send(model, prompt)
    }
}
