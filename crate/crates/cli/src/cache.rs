//! Persistent (context, continuation) score cache.
//!
//! The cache is a JSONL file in the run's output directory; keys map to the
//! backend's [`TokenLogProbs`]. Entries are written sorted by key, so cache
//! files are byte-identical across runs regardless of worker scheduling.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use brmgr_core::scorer::{LmScorer, ScoreRequest, ScorerError, TokenLogProbs};
use serde::{Deserialize, Serialize};

/// Default cache file name inside the output directory.
pub const CACHE_FILE: &str = "cache.jsonl";

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    context: String,
    continuation: String,
    token_count: usize,
    logprob_sum: f64,
    per_token: Option<Vec<f64>>,
}

/// Thread-safe score cache keyed by (context, continuation).
#[derive(Default)]
pub struct ScoreCache {
    entries: Mutex<BTreeMap<(String, String), TokenLogProbs>>,
}

impl ScoreCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a cache file if it exists; a missing file yields an empty cache.
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let cache = ScoreCache::new();
        let file = match File::open(path) {
            Ok(file) => file,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(e),
        };
        let reader = BufReader::new(file);
        let mut entries = cache.entries.lock().expect("cache lock");
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry = serde_json::from_str(&line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            entries.insert(
                (entry.context, entry.continuation),
                TokenLogProbs {
                    token_count: entry.token_count,
                    logprob_sum: entry.logprob_sum,
                    per_token: entry.per_token,
                },
            );
        }
        drop(entries);
        Ok(cache)
    }

    /// Writes all entries sorted by key.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let entries = self.entries.lock().expect("cache lock");
        let mut writer = BufWriter::new(File::create(path)?);
        for ((context, continuation), probs) in entries.iter() {
            let entry = CacheEntry {
                context: context.clone(),
                continuation: continuation.clone(),
                token_count: probs.token_count,
                logprob_sum: probs.logprob_sum,
                per_token: probs.per_token.clone(),
            };
            serde_json::to_writer(&mut writer, &entry)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, request: &ScoreRequest) -> Option<TokenLogProbs> {
        self.entries
            .lock()
            .expect("cache lock")
            .get(&(request.context.clone(), request.continuation.clone()))
            .cloned()
    }

    fn insert(&self, request: &ScoreRequest, probs: TokenLogProbs) {
        self.entries.lock().expect("cache lock").insert(
            (request.context.clone(), request.continuation.clone()),
            probs,
        );
    }
}

/// Scorer wrapper that consults a [`ScoreCache`] before the inner scorer.
///
/// Concurrent misses on the same key may both hit the backend; both compute
/// the same value, so the cache stays consistent.
pub struct CachingScorer<S> {
    inner: S,
    cache: std::sync::Arc<ScoreCache>,
}

impl<S: LmScorer> CachingScorer<S> {
    pub fn new(inner: S, cache: std::sync::Arc<ScoreCache>) -> Self {
        CachingScorer { inner, cache }
    }
}

impl<S: LmScorer> LmScorer for CachingScorer<S> {
    fn score_continuation(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        if let Some(hit) = self.cache.get(request) {
            return Ok(hit);
        }
        let probs = self.inner.score_continuation(request)?;
        self.cache.insert(request, probs.clone());
        Ok(probs)
    }
}
