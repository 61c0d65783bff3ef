//! Text-generation backends.
//!
//! All backends implement [`TextGen`]: a chat request in, exactly
//! `n_samples` completions out. [`SimulatedBackend`] answers from the
//! built-in world, [`ScriptedBackend`] replays a recorded JSONL file and
//! [`HttpBackend`] talks to a chat-completions endpoint.

mod http;
mod scripted;
mod simulated;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use coevo_core::prompts::{
    parse_boxed_answer, render_challenger_prompt, render_judge_prompt, render_solver_prompt,
    Message, Role,
};
pub use http::{HttpBackend, RetryPolicy};
pub use scripted::{Recorder, ReplayRecord, ScriptedBackend};
pub use simulated::SimulatedBackend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n_samples: usize,
}

impl GenerationRequest {
    pub fn new(
        messages: Vec<Message>,
        gen: &coevo_core::config::GenerationConfig,
        n_samples: usize,
    ) -> Self {
        Self {
            messages,
            temperature: gen.temperature,
            top_p: gen.top_p,
            max_tokens: gen.max_tokens,
            n_samples,
        }
    }

    /// Greedy single-sample request, as used for judging.
    pub fn greedy(messages: Vec<Message>, max_tokens: u32) -> Self {
        Self {
            messages,
            temperature: 0.0,
            top_p: 1.0,
            max_tokens,
            n_samples: 1,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: &str| Err(BackendError::InvalidRequest(m.to_string()));
        if self.messages.is_empty() {
            return bad("request has no messages");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be >= 0");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.max_tokens == 0 || self.n_samples == 0 {
            return bad("max_tokens and n_samples must be positive");
        }
        Ok(())
    }

    /// Hex SHA-256 of the request's JSON form; the replay-file key.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn system(&self) -> Option<&str> {
        self.messages
            .iter()
            .find(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
    }

    pub fn user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    /// Network-level failure; retried before surfacing.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body_excerpt}")]
    Status { status: u16, body_excerpt: String },
    #[error("malformed backend response: {0}")]
    Decode(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("replay exhausted: no recorded completions left for request {hash}")]
    ReplayExhausted { hash: String },
    #[error("replay file error: {0}")]
    Replay(String),
}

impl BackendError {
    /// Whether the failure is a problem with local data rather than the
    /// service.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            BackendError::ReplayExhausted { .. } | BackendError::Replay(_)
        )
    }

    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A source of chat completions. Implementations are shareable across
/// threads; any internal cursor is synchronized.
pub trait TextGen: Send + Sync {
    /// Exactly `request.n_samples` completions.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError>;

    /// Resumable position, if the backend has one (replay cursors).
    fn cursor(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn restore_cursor(&self, _cursor: &serde_json::Value) -> Result<(), BackendError> {
        Ok(())
    }

    /// Short name for logs.
    fn kind(&self) -> &'static str;
}

impl<T: TextGen + ?Sized> TextGen for std::sync::Arc<T> {
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        (**self).generate(request)
    }

    fn cursor(&self) -> serde_json::Value {
        (**self).cursor()
    }

    fn restore_cursor(&self, cursor: &serde_json::Value) -> Result<(), BackendError> {
        (**self).restore_cursor(cursor)
    }

    fn kind(&self) -> &'static str {
        (**self).kind()
    }
}

/// Convenience wrapper: validate, call, and check the sample count.
pub fn generate(
    backend: &dyn TextGen,
    request: &GenerationRequest,
) -> Result<Vec<String>, BackendError> {
    request.validate()?;
    let out = backend.generate(request)?;
    if out.len() != request.n_samples {
        return Err(BackendError::Decode(format!(
            "expected {} completions, got {}",
            request.n_samples,
            out.len()
        )));
    }
    Ok(out)
}
