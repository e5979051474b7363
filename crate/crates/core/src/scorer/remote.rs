//! HTTP client for a remote teacher-forcing scoring endpoint.
//!
//! Protocol: one POST endpoint accepting `{"context": string,
//! "continuation": string}` and returning `{"tokens": [string],
//! "logprobs": [number]}`. Token counts come from the backend's tokenizer
//! and are never re-tokenized locally.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LmScorer, ScoreRequest, ScorerError, TokenLogProbs};

/// Environment variable read for the bearer token.
pub const AUTH_TOKEN_ENV: &str = "SCORER_API_TOKEN";

const INITIAL_BACKOFF: Duration = Duration::from_millis(100);

/// Connection settings for a [`RemoteScorer`].
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Full URL of the scoring endpoint.
    pub endpoint: String,
    /// Per-request timeout in seconds.
    pub timeout_secs: u64,
    /// How many times a retryable failure is retried (exponential backoff,
    /// 100 ms base). `BackendRejected` is never retried.
    pub retries: u32,
    /// Bearer token sent as `Authorization: Bearer <token>` when present.
    pub auth_token: Option<String>,
}

impl RemoteConfig {
    /// Creates a config with defaults (30 s timeout, 2 retries) and the
    /// auth token taken from [`AUTH_TOKEN_ENV`] if set.
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_secs: 30,
            retries: 2,
            auth_token: std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    context: &'a str,
    continuation: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

/// Scorer backed by a remote HTTP endpoint.
///
/// Safe for concurrent callers; the underlying agent pools connections
/// internally.
pub struct RemoteScorer {
    agent: ureq::Agent,
    config: RemoteConfig,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteScorer { agent, config }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        let payload = WireRequest {
            context: &request.context,
            continuation: &request.continuation,
        };
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.auth_token {
            call = call.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = call
            .send_json(&payload)
            .map_err(|e| ScorerError::BackendUnavailable {
                reason: e.to_string(),
            })?;

        let status = response.status().as_u16();
        if (500..=599).contains(&status) {
            return Err(ScorerError::BackendUnavailable {
                reason: format!("server error {status}"),
            });
        }
        if !(200..=299).contains(&status) {
            return Err(ScorerError::BackendRejected {
                reason: format!("status {status}"),
            });
        }

        let body: WireResponse =
            response
                .body_mut()
                .read_json()
                .map_err(|e| ScorerError::BackendRejected {
                    reason: format!("unparseable response: {e}"),
                })?;
        if body.tokens.len() != body.logprobs.len() {
            return Err(ScorerError::BackendRejected {
                reason: format!(
                    "{} tokens but {} logprobs",
                    body.tokens.len(),
                    body.logprobs.len()
                ),
            });
        }
        if body.tokens.is_empty() {
            return Err(ScorerError::EmptyContinuationAfterTokenization);
        }
        TokenLogProbs::from_per_token(body.logprobs)
    }
}

impl LmScorer for RemoteScorer {
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        if request.continuation.is_empty() {
            return Err(ScorerError::EmptyContinuation);
        }
        let mut backoff = INITIAL_BACKOFF;
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Err(error) if error.is_retryable() && attempt < self.config.retries => {
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                outcome => return outcome,
            }
        }
    }
}
