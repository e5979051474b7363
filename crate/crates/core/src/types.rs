//! Shared domain model: questions, passages, scores, and matches.
//!
//! All types here are immutable after construction and safe to share across
//! concurrent workers without synchronization.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Scalar, Score};

/// Where a passage came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Retrieved,
    Generated,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Retrieved => f.write_str("retrieved"),
            Source::Generated => f.write_str("generated"),
        }
    }
}

/// A question with its gold answer aliases.
///
/// Answer strings are stored raw; normalization happens only inside the
/// evaluation module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub answers: Vec<String>,
}

/// A text unit tagged retrieved or generated.
///
/// `origin_rank` is the passage's position in the incoming list and is the
/// tie-breaker for every downstream sort, which keeps the whole pipeline
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub source: Source,
    pub title: Option<String>,
    pub text: String,
    pub origin_rank: usize,
}

/// A passage plus its mean per-token log-likelihood score (nats) and its
/// position after sorting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPassage<T = Score> {
    pub passage: Passage,
    pub score: T,
    pub rank: usize,
}

/// One (generated, retrieved) pairing with its combined log-space score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair<T = Score> {
    pub gen_index: usize,
    pub retr_index: usize,
    pub combined_score: T,
}

/// Error building a [`RelevanceMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    Empty,
    NonFinite { side: Source, index: usize },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::Empty => f.write_str("relevance matrix requires non-empty score lists"),
            MatrixError::NonFinite { side, index } => {
                write!(f, "non-finite {side} score at index {index}")
            }
        }
    }
}

impl std::error::Error for MatrixError {}

/// M×N log-space combination scores together with the rank-one factors
/// they were built from.
///
/// `cells[i][j]` is exactly `gen_scores[i] + retr_scores[j]` — the log-space
/// counterpart of the factorized combination relevance. The identity holds
/// bit-for-bit because cells are constructed from the factors, never
/// measured.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMatrix<T = Score> {
    gen_scores: Vec<T>,
    retr_scores: Vec<T>,
    cells: Vec<Vec<T>>,
}

impl<T: Scalar> RelevanceMatrix<T> {
    /// Builds the matrix from per-side log-scores (generated rows,
    /// retrieved columns).
    pub fn from_factors(gen_scores: Vec<T>, retr_scores: Vec<T>) -> Result<Self, MatrixError> {
        if gen_scores.is_empty() || retr_scores.is_empty() {
            return Err(MatrixError::Empty);
        }
        for (index, score) in gen_scores.iter().enumerate() {
            if !score.is_finite() {
                return Err(MatrixError::NonFinite {
                    side: Source::Generated,
                    index,
                });
            }
        }
        for (index, score) in retr_scores.iter().enumerate() {
            if !score.is_finite() {
                return Err(MatrixError::NonFinite {
                    side: Source::Retrieved,
                    index,
                });
            }
        }
        let cells = gen_scores
            .iter()
            .map(|&g| retr_scores.iter().map(|&r| g + r).collect())
            .collect();
        Ok(RelevanceMatrix {
            gen_scores,
            retr_scores,
            cells,
        })
    }

    /// Number of generated passages (rows).
    pub fn rows(&self) -> usize {
        self.gen_scores.len()
    }

    /// Number of retrieved passages (columns).
    pub fn cols(&self) -> usize {
        self.retr_scores.len()
    }

    pub fn gen_scores(&self) -> &[T] {
        &self.gen_scores
    }

    pub fn retr_scores(&self) -> &[T] {
        &self.retr_scores
    }

    pub fn cells(&self) -> &[Vec<T>] {
        &self.cells
    }
}

/// One question record as ingested, before validation.
///
/// Passage arrays are in retriever/generator rank order; an explicit
/// `origin_rank` on a passage overrides its position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: String,
    pub question: String,
    #[serde(default)]
    pub answers: Vec<String>,
    #[serde(default)]
    pub retrieved: Vec<PassageRecord>,
    #[serde(default)]
    pub generated: Vec<PassageRecord>,
}

/// One passage entry inside a [`QuestionRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_rank: Option<usize>,
}

/// A validated record: the query plus its retrieved and generated passages.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedRecord {
    pub query: Query,
    pub retrieved: Vec<Passage>,
    pub generated: Vec<Passage>,
}

/// Validation failure for an ingested record. Each variant names the
/// offending record id and field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationError {
    MissingField { record: String, field: String },
    EmptyText { record: String, field: String },
    DuplicateRank { record: String, field: String, rank: usize },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationError::MissingField { record, field } => {
                write!(f, "record '{record}': missing or empty field '{field}'")
            }
            ValidationError::EmptyText { record, field } => {
                write!(f, "record '{record}': field '{field}' is empty after trimming")
            }
            ValidationError::DuplicateRank { record, field, rank } => {
                write!(f, "record '{record}': duplicate origin_rank {rank} in '{field}'")
            }
        }
    }
}

impl std::error::Error for ValidationError {}

/// Validates one ingested record into a [`Query`] and its passage lists.
pub fn validate_question_record(record: &QuestionRecord) -> Result<ValidatedRecord, ValidationError> {
    let record_id = record.question_id.clone();
    if record_id.trim().is_empty() {
        return Err(ValidationError::MissingField {
            record: String::from("<unidentified>"),
            field: String::from("question_id"),
        });
    }
    if record.question.trim().is_empty() {
        return Err(ValidationError::EmptyText {
            record: record_id,
            field: String::from("question"),
        });
    }
    if !record.answers.iter().any(|a| !a.trim().is_empty()) {
        return Err(ValidationError::MissingField {
            record: record_id,
            field: String::from("answers"),
        });
    }

    let retrieved = validate_passages(&record_id, "retrieved", &record.retrieved, Source::Retrieved)?;
    let generated = validate_passages(&record_id, "generated", &record.generated, Source::Generated)?;

    Ok(ValidatedRecord {
        query: Query {
            id: record.question_id.clone(),
            text: record.question.clone(),
            answers: record.answers.clone(),
        },
        retrieved,
        generated,
    })
}

fn validate_passages(
    record_id: &str,
    field: &str,
    entries: &[PassageRecord],
    source: Source,
) -> Result<Vec<Passage>, ValidationError> {
    let mut seen_ranks = std::collections::HashSet::new();
    let mut passages = Vec::with_capacity(entries.len());
    for (position, entry) in entries.iter().enumerate() {
        if entry.text.trim().is_empty() {
            return Err(ValidationError::EmptyText {
                record: record_id.to_string(),
                field: format!("{field}[{position}].text"),
            });
        }
        let origin_rank = entry.origin_rank.unwrap_or(position);
        if !seen_ranks.insert(origin_rank) {
            return Err(ValidationError::DuplicateRank {
                record: record_id.to_string(),
                field: field.to_string(),
                rank: origin_rank,
            });
        }
        passages.push(Passage {
            id: entry.id.clone(),
            source,
            title: entry.title.clone(),
            text: entry.text.clone(),
            origin_rank,
        });
    }
    Ok(passages)
}
