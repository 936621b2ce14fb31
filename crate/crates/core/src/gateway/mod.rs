//! Chat providers and code extraction.
//!
//! A [`Gateway`] runs in one of three modes. Live sends each prompt as a
//! single-turn request through a [`ChatTransport`]; record does the same and
//! appends every exchange to a transcript; replay answers from a transcript
//! without touching the network.

mod extract;
mod live;
mod transcript;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_code, CodeOrigin, ExtractError, ExtractedCode};
pub use live::{
    ChatTransport, HttpTransport, RetryPolicy, ScriptedTransport, TransportFailure, TransportReply, API_KEY_ENV,
    DEFAULT_BASE_URL, DEFAULT_MODEL,
};
pub use transcript::{LineKind, Transcript, TranscriptLine, TranscriptWriter};

use crate::prompts::RenderedPrompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub session_id: String,
    pub sequence: usize,
    pub model: String,
    pub prompt_text: String,
    pub response_text: String,
    pub latency_ms: u64,
    pub token_usage: Option<TokenUsage>,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failed after {attempts} attempt(s): {reason}")]
    Transport { attempts: u32, reason: String },
    #[error("provider rejected the credential (HTTP {0})")]
    Auth(u16),
    #[error("transcript has no exchange {seq} for session {session}")]
    ReplayExhausted { session: String, seq: usize },
    #[error("prompt {seq} of session {session} differs from the recorded prompt")]
    ReplayDivergence {
        session: String,
        seq: usize,
        recorded: String,
        rendered: String,
    },
    #[error("transcript: {0}")]
    Transcript(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMatch {
    /// The rendered prompt must equal the recorded one.
    Strict,
    /// Only the sequence index is used.
    Relaxed,
}

enum Mode {
    Live {
        transport: Box<dyn ChatTransport>,
        retry: RetryPolicy,
    },
    Replay {
        by_session: HashMap<String, Vec<ChatExchange>>,
        matching: ReplayMatch,
    },
}

/// Safe to share between concurrently running sessions. Sequence numbers are
/// kept per session id.
pub struct Gateway {
    mode: Mode,
    model: String,
    recorder: Option<TranscriptWriter>,
    next_seq: Mutex<HashMap<String, usize>>,
}

impl Gateway {
    pub fn live(transport: impl ChatTransport + 'static, model: impl Into<String>) -> Self {
        Self {
            mode: Mode::Live {
                transport: Box::new(transport),
                retry: RetryPolicy::default(),
            },
            model: model.into(),
            recorder: None,
            next_seq: Mutex::default(),
        }
    }

    /// Live mode that also writes every exchange to a fresh transcript at `path`.
    pub fn record(
        transport: impl ChatTransport + 'static,
        model: impl Into<String>,
        path: &Path,
    ) -> Result<Self, GatewayError> {
        Self::live(transport, model).recording_to(path)
    }

    pub fn replay(transcript: Transcript, matching: ReplayMatch) -> Self {
        let mut by_session: HashMap<String, Vec<ChatExchange>> = HashMap::new();
        let mut model = None;
        for e in transcript.exchanges() {
            model.get_or_insert_with(|| e.model.clone());
            by_session.entry(e.session_id.clone()).or_default().push(e.clone());
        }
        Self {
            mode: Mode::Replay { by_session, matching },
            model: model.unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            recorder: None,
            next_seq: Mutex::default(),
        }
    }

    pub fn replay_file(path: &Path, matching: ReplayMatch) -> Result<Self, GatewayError> {
        Ok(Self::replay(Transcript::load(path)?, matching))
    }

    /// Also writes exchanges to `path` (truncated first). In replay mode this
    /// re-emits the transcript that was consumed.
    pub fn recording_to(mut self, path: &Path) -> Result<Self, GatewayError> {
        let writer = TranscriptWriter::create(path).map_err(|e| GatewayError::Transcript(format!("{}: {e}", path.display())))?;
        self.recorder = Some(writer);
        Ok(self)
    }

    pub fn with_retry(mut self, policy: RetryPolicy) -> Self {
        if let Mode::Live { retry, .. } = &mut self.mode {
            *retry = policy;
        }
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn is_replay(&self) -> bool {
        matches!(self.mode, Mode::Replay { .. })
    }

    /// Number of exchanges completed for `session_id`.
    pub fn calls_for(&self, session_id: &str) -> usize {
        self.next_seq.lock().unwrap().get(session_id).copied().unwrap_or(0)
    }

    pub fn complete(&self, session_id: &str, prompt: &RenderedPrompt) -> Result<ChatExchange, GatewayError> {
        let seq = self.calls_for(session_id);
        let started = Instant::now();
        let exchange = match &self.mode {
            Mode::Live { transport, retry } => {
                let reply = send_with_retry(transport.as_ref(), *retry, &self.model, &prompt.text)?;
                ChatExchange {
                    session_id: session_id.to_string(),
                    sequence: seq,
                    model: self.model.clone(),
                    prompt_text: prompt.text.clone(),
                    response_text: reply.text,
                    latency_ms: started.elapsed().as_millis() as u64,
                    token_usage: reply.usage,
                }
            }
            Mode::Replay { by_session, matching } => {
                let recorded = by_session
                    .get(session_id)
                    .and_then(|v| v.get(seq))
                    .ok_or_else(|| GatewayError::ReplayExhausted {
                        session: session_id.to_string(),
                        seq,
                    })?;
                if *matching == ReplayMatch::Strict && recorded.prompt_text != prompt.text {
                    return Err(GatewayError::ReplayDivergence {
                        session: session_id.to_string(),
                        seq,
                        recorded: recorded.prompt_text.clone(),
                        rendered: prompt.text.clone(),
                    });
                }
                ChatExchange {
                    prompt_text: prompt.text.clone(),
                    latency_ms: 0,
                    ..recorded.clone()
                }
            }
        };
        if let Some(writer) = &self.recorder {
            writer
                .record(&exchange)
                .map_err(|e| GatewayError::Transcript(e.to_string()))?;
        }
        self.next_seq.lock().unwrap().insert(session_id.to_string(), seq + 1);
        Ok(exchange)
    }
}

fn send_with_retry(
    transport: &dyn ChatTransport,
    policy: RetryPolicy,
    model: &str,
    prompt: &str,
) -> Result<TransportReply, GatewayError> {
    let mut attempt = 1;
    loop {
        match transport.send(model, prompt) {
            Ok(reply) => return Ok(reply),
            Err(TransportFailure::Auth(code)) => return Err(GatewayError::Auth(code)),
            Err(TransportFailure::Rejected(code, body)) => {
                return Err(GatewayError::Transport {
                    attempts: attempt,
                    reason: format!("HTTP {code}: {body}"),
                })
            }
            Err(TransportFailure::Retryable(reason)) => {
                if attempt >= policy.max_attempts {
                    return Err(GatewayError::Transport { attempts: attempt, reason });
                }
                attempt += 1;
                log::warn!("chat request failed ({reason}), retry {attempt}/{}", policy.max_attempts);
                std::thread::sleep(policy.delay_before(attempt));
            }
        }
    }
}
