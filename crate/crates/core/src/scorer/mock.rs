//! Deterministic offline scorer for fixtures and tests.

use std::collections::HashSet;

use super::{LmScorer, ScoreRequest, ScorerError, TokenLogProbs};

/// Log-probability assigned to a continuation word that occurs in the context.
pub const MATCH_LOGPROB: f64 = -1.0;
/// Log-probability assigned to a continuation word absent from the context.
pub const MISS_LOGPROB: f64 = -5.0;
/// Magnitude of the deterministic tie-breaking jitter.
pub const JITTER_SPAN: f64 = 0.01;

/// Word-overlap scorer with a published, fully deterministic formula.
///
/// Tokenization is lowercase whitespace splitting. Each continuation word
/// scores [`MATCH_LOGPROB`] if the same lowercased word occurs anywhere in
/// the context and [`MISS_LOGPROB`] otherwise, plus a jitter in
/// `[-0.01, 0]` computed from an FNV-1a hash of the word and its position
/// (see [`jitter`]). The jitter depends only on the continuation, so for a
/// fixed continuation the mean log-probability strictly increases with the
/// number of distinct context-shared words; jitter only breaks ties between
/// different continuations.
///
/// Outputs are bit-identical for identical requests across runs and
/// platforms.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockScorer;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(word: &str, position: usize) -> u64 {
    let mut hash = FNV_OFFSET;
    for byte in word.bytes().chain([0x1f]).chain((position as u64).to_le_bytes()) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Deterministic jitter in `[-0.01, 0]` for a continuation word at a given
/// token position: `-0.01 * (fnv1a64(word, position) % 1000) / 999`.
pub fn jitter(word: &str, position: usize) -> f64 {
    -JITTER_SPAN * (fnv1a64(word, position) % 1000) as f64 / 999.0
}

impl LmScorer for MockScorer {
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        if request.continuation.is_empty() {
            return Err(ScorerError::EmptyContinuation);
        }
        let context_words: HashSet<String> = request
            .context
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        let tokens: Vec<String> = request
            .continuation
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        if tokens.is_empty() {
            return Err(ScorerError::EmptyContinuationAfterTokenization);
        }
        let per_token: Vec<f64> = tokens
            .iter()
            .enumerate()
            .map(|(position, word)| {
                let base = if context_words.contains(word) {
                    MATCH_LOGPROB
                } else {
                    MISS_LOGPROB
                };
                base + jitter(word, position)
            })
            .collect();
        TokenLogProbs::from_per_token(per_token)
    }
}
