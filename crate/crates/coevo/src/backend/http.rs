use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, GenerationRequest, TextGen};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts per call, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles each time after.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

/// Client for a chat-completions endpoint (`POST` to the full URL given).
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
    retry: RetryPolicy,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

const EXCERPT_LEN: usize = 512;

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        token: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| BackendError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            token,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn call_once(
        &self,
        request: &GenerationRequest,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "top_p": request.top_p,
            "n": n,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder.send().map_err(|e| BackendError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport {
            attempts: 1,
            message: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body_excerpt: text.chars().take(EXCERPT_LEN).collect(),
            });
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Decode(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .map(|c| {
                c.message
                    .content
                    .ok_or_else(|| BackendError::Decode("choice without message content".into()))
            })
            .collect()
    }

    fn call_with_retry(
        &self,
        request: &GenerationRequest,
        n: usize,
    ) -> Result<Vec<String>, BackendError> {
        let mut delay = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.call_once(request, n) {
                Ok(out) => return Ok(out),
                Err(err) if err.is_retryable() && attempt < self.retry.max_attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(BackendError::Transport { message, .. }) => {
                    return Err(BackendError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Err(err) => return Err(err),
            }
        }
    }
}

impl TextGen for HttpBackend {
    /// Some servers ignore `n`; keep asking for the remainder until the
    /// requested count is reached.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<String>, BackendError> {
        let mut out = Vec::with_capacity(request.n_samples);
        for _ in 0..request.n_samples {
            let remaining = request.n_samples - out.len();
            if remaining == 0 {
                break;
            }
            let batch = self.call_with_retry(request, remaining)?;
            if batch.is_empty() {
                return Err(BackendError::Decode("response carried no choices".into()));
            }
            out.extend(batch.into_iter().take(remaining));
        }
        Ok(out)
    }

    fn kind(&self) -> &'static str {
        "http"
    }
}
