//! Teacher-forcing token log-probability sources.
//!
//! An [`LmScorer`] scores a fixed continuation token-by-token under a
//! language model, conditioning on a context string. Two implementations
//! are provided: [`MockScorer`] (deterministic, offline) and
//! [`RemoteScorer`] (HTTP client for a scoring endpoint).

mod mock;
mod remote;

pub use mock::MockScorer;
pub use remote::{RemoteConfig, RemoteScorer, AUTH_TOKEN_ENV};

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// A request to score `continuation` conditioned on `context`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRequest {
    /// Conditioning text fed before the scored continuation.
    pub context: String,
    /// The text whose tokens are scored. Must be non-empty.
    pub continuation: String,
}

impl ScoreRequest {
    pub fn new(context: impl Into<String>, continuation: impl Into<String>) -> Self {
        ScoreRequest {
            context: context.into(),
            continuation: continuation.into(),
        }
    }
}

/// Token-level log-probabilities for one scored continuation, under the
/// backing model's own tokenizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    /// Number of continuation tokens; always ≥ 1.
    pub token_count: usize,
    /// Sum of per-token log-probabilities in nats.
    pub logprob_sum: f64,
    /// Individual log-probabilities, when the backend reports them.
    pub per_token: Option<Vec<f64>>,
}

impl TokenLogProbs {
    /// Builds from explicit fields, checking the type invariants: a positive
    /// token count, finite values, and (when present) a per-token list whose
    /// length matches and whose sum agrees with `logprob_sum` within 1e-9.
    pub fn new(
        token_count: usize,
        logprob_sum: f64,
        per_token: Option<Vec<f64>>,
    ) -> Result<Self, ScorerError> {
        if token_count == 0 {
            return Err(ScorerError::InvalidLogProbs {
                reason: String::from("token_count must be >= 1"),
            });
        }
        if !logprob_sum.is_finite() {
            return Err(ScorerError::InvalidLogProbs {
                reason: format!("logprob_sum is not finite: {logprob_sum}"),
            });
        }
        if let Some(values) = &per_token {
            if values.len() != token_count {
                return Err(ScorerError::InvalidLogProbs {
                    reason: format!(
                        "per_token length {} does not match token_count {token_count}",
                        values.len()
                    ),
                });
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(ScorerError::InvalidLogProbs {
                    reason: format!("per-token log-probability is not finite: {bad}"),
                });
            }
            let sum: f64 = values.iter().sum();
            if (sum - logprob_sum).abs() > 1e-9 {
                return Err(ScorerError::InvalidLogProbs {
                    reason: format!("per_token sum {sum} disagrees with logprob_sum {logprob_sum}"),
                });
            }
        }
        Ok(TokenLogProbs {
            token_count,
            logprob_sum,
            per_token,
        })
    }

    /// Builds from a per-token list, summing it.
    pub fn from_per_token(values: Vec<f64>) -> Result<Self, ScorerError> {
        let sum: f64 = values.iter().sum();
        TokenLogProbs::new(values.len(), sum, Some(values))
    }

    /// Mean per-token log-likelihood in nats.
    pub fn mean(&self) -> f64 {
        self.logprob_sum / self.token_count as f64
    }
}

/// Scoring failure.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerError {
    /// The request's continuation was the empty string (precondition).
    EmptyContinuation,
    /// The continuation produced no tokens under the scorer's tokenizer.
    EmptyContinuationAfterTokenization,
    /// Transport-level failure or server error; retryable.
    BackendUnavailable { reason: String },
    /// The backend rejected the request (malformed prompt, length
    /// overflow, bad response schema); not retryable.
    BackendRejected { reason: String },
    /// The backend returned values violating the [`TokenLogProbs`] invariants.
    InvalidLogProbs { reason: String },
}

impl ScorerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ScorerError::BackendUnavailable { .. })
    }
}

impl fmt::Display for ScorerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerError::EmptyContinuation => f.write_str("continuation is empty"),
            ScorerError::EmptyContinuationAfterTokenization => {
                f.write_str("continuation has no tokens after tokenization")
            }
            ScorerError::BackendUnavailable { reason } => {
                write!(f, "scoring backend unavailable: {reason}")
            }
            ScorerError::BackendRejected { reason } => {
                write!(f, "scoring backend rejected request: {reason}")
            }
            ScorerError::InvalidLogProbs { reason } => {
                write!(f, "invalid log-probabilities: {reason}")
            }
        }
    }
}

impl std::error::Error for ScorerError {}

/// A [`ScorerError`] tagged with the index of the failing batch request.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchError {
    pub index: usize,
    pub source: ScorerError,
}

impl fmt::Display for BatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "request {} failed: {}", self.index, self.source)
    }
}

impl std::error::Error for BatchError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Abstraction over a teacher-forcing token-log-probability source.
///
/// Implementations must be safe for concurrent callers and must return the
/// same values regardless of call ordering, so batch scoring is
/// value-equivalent to sequential scoring.
pub trait LmScorer: Send + Sync {
    /// Scores the continuation's tokens conditioned on the context.
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError>;

    /// Scores a list of requests with at most `max_in_flight` concurrent
    /// calls (values below 1 are treated as 1). Results are positionally
    /// aligned with `requests`. On failure, the error for the lowest
    /// failing index is returned and partial results are discarded.
    fn score_batch(
        &self,
        requests: &[ScoreRequest],
        max_in_flight: usize,
    ) -> Result<Vec<TokenLogProbs>, BatchError> {
        let workers = max_in_flight.max(1).min(requests.len().max(1));
        if workers <= 1 {
            return requests
                .iter()
                .enumerate()
                .map(|(index, request)| {
                    self.score_continuation(request)
                        .map_err(|source| BatchError { index, source })
                })
                .collect();
        }

        let cursor = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<TokenLogProbs, ScorerError>>>> =
            Mutex::new(vec![None; requests.len()]);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let index = cursor.fetch_add(1, Ordering::Relaxed);
                    if index >= requests.len() {
                        break;
                    }
                    let outcome = self.score_continuation(&requests[index]);
                    slots.lock().expect("batch result lock").as_mut_slice()[index] = Some(outcome);
                });
            }
        });

        let results = slots.into_inner().expect("batch result lock");
        let mut out = Vec::with_capacity(requests.len());
        for (index, slot) in results.into_iter().enumerate() {
            match slot.expect("every batch slot filled") {
                Ok(value) => out.push(value),
                Err(source) => return Err(BatchError { index, source }),
            }
        }
        Ok(out)
    }
}

impl<S: LmScorer + ?Sized> LmScorer for &S {
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        (**self).score_continuation(request)
    }

    fn score_batch(
        &self,
        requests: &[ScoreRequest],
        max_in_flight: usize,
    ) -> Result<Vec<TokenLogProbs>, BatchError> {
        (**self).score_batch(requests, max_in_flight)
    }
}

impl<S: LmScorer + ?Sized> LmScorer for Box<S> {
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        (**self).score_continuation(request)
    }

    fn score_batch(
        &self,
        requests: &[ScoreRequest],
        max_in_flight: usize,
    ) -> Result<Vec<TokenLogProbs>, BatchError> {
        (**self).score_batch(requests, max_in_flight)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_token_sum_identity() {
        let probs = TokenLogProbs::from_per_token(vec![-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(probs.logprob_sum, -6.0);
        assert_eq!(probs.token_count, 3);
        assert_eq!(probs.mean(), -2.0);
    }

    #[test]
    fn zero_tokens_rejected() {
        assert!(TokenLogProbs::from_per_token(vec![]).is_err());
        assert!(TokenLogProbs::new(0, 0.0, None).is_err());
    }

    #[test]
    fn mismatched_sum_rejected() {
        let err = TokenLogProbs::new(2, -1.0, Some(vec![-1.0, -2.0])).unwrap_err();
        assert!(matches!(err, ScorerError::InvalidLogProbs { .. }));
    }

    #[test]
    fn mismatched_length_rejected() {
        let err = TokenLogProbs::new(3, -3.0, Some(vec![-1.0, -2.0])).unwrap_err();
        assert!(matches!(err, ScorerError::InvalidLogProbs { .. }));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(TokenLogProbs::new(1, f64::NAN, None).is_err());
        assert!(TokenLogProbs::from_per_token(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn batch_error_carries_first_failing_index() {
        struct FailOnShort;
        impl LmScorer for FailOnShort {
            fn score_continuation(
                &self,
                request: &ScoreRequest,
            ) -> Result<TokenLogProbs, ScorerError> {
                if request.continuation.len() < 2 {
                    Err(ScorerError::BackendRejected {
                        reason: String::from("too short"),
                    })
                } else {
                    TokenLogProbs::from_per_token(vec![-1.0])
                }
            }
        }

        let requests = vec![
            ScoreRequest::new("c", "ok"),
            ScoreRequest::new("c", "x"),
            ScoreRequest::new("c", "y"),
        ];
        let err = FailOnShort.score_batch(&requests, 3).unwrap_err();
        assert_eq!(err.index, 1);
    }
}
