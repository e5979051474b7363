//! Answer normalization, span containment, and the top-K retrieval exact
//! match metric.
//!
//! A question counts as a hit at K when at least one of its top-K passages
//! contains a normalized gold answer as a contiguous token subsequence of
//! the normalized passage text. Titles are excluded from containment.

use std::fmt;

use serde::Serialize;

use crate::{Passage, Query};

/// Normalizes an answer or passage string: lowercase, strip ASCII
/// punctuation, drop the articles "a"/"an"/"the" as whole words, collapse
/// whitespace. Idempotent.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|word| !matches!(*word, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn normalized_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(String::from)
        .collect()
}

/// True when any normalized answer appears as a contiguous token
/// subsequence of the normalized passage text. Answers that normalize to
/// nothing never match.
pub fn passage_contains_answer(passage: &Passage, answers: &[String]) -> bool {
    let haystack = normalized_tokens(&passage.text);
    answers.iter().any(|answer| {
        let needle = normalized_tokens(answer);
        !needle.is_empty()
            && needle.len() <= haystack.len()
            && haystack.windows(needle.len()).any(|window| window == needle)
    })
}

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    MisalignedInputs { ranked: usize, queries: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::MisalignedInputs { ranked, queries } => {
                write!(f, "{ranked} ranked lists but {queries} queries")
            }
        }
    }
}

impl std::error::Error for EvalError {}

/// Fraction of questions whose first `min(k, len)` passages contain a gold
/// answer. `k` must be at least 1.
pub fn top_k_exact_match(
    ranked: &[Vec<Passage>],
    queries: &[Query],
    k: usize,
) -> Result<f64, EvalError> {
    assert!(k >= 1, "k must be >= 1");
    if ranked.len() != queries.len() {
        return Err(EvalError::MisalignedInputs {
            ranked: ranked.len(),
            queries: queries.len(),
        });
    }
    let hits = ranked
        .iter()
        .zip(queries)
        .filter(|(passages, query)| {
            passages
                .iter()
                .take(k)
                .any(|p| passage_contains_answer(p, &query.answers))
        })
        .count();
    Ok(hits as f64 / queries.len() as f64)
}

/// Top-K exact match results for one ranked corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// The K values evaluated, in the order given.
    pub k_values: Vec<usize>,
    /// `hits[q][i]` — whether question `q` hit within the top `k_values[i]`.
    pub hits: Vec<Vec<bool>>,
    /// `em_at_k[i]` = hit count at `k_values[i]` / `question_count`.
    pub em_at_k: Vec<f64>,
    pub question_count: usize,
}

impl EvalReport {
    /// Evaluates ranked passage lists against their queries at each K.
    pub fn compute(
        ranked: &[Vec<Passage>],
        queries: &[Query],
        k_values: &[usize],
    ) -> Result<Self, EvalError> {
        if ranked.len() != queries.len() {
            return Err(EvalError::MisalignedInputs {
                ranked: ranked.len(),
                queries: queries.len(),
            });
        }
        // One containment scan per passage; hit@K is then a rank threshold.
        let first_hit_ranks: Vec<Option<usize>> = ranked
            .iter()
            .zip(queries)
            .map(|(passages, query)| {
                passages
                    .iter()
                    .position(|p| passage_contains_answer(p, &query.answers))
            })
            .collect();
        let hits: Vec<Vec<bool>> = first_hit_ranks
            .iter()
            .map(|first| {
                k_values
                    .iter()
                    .map(|&k| first.is_some_and(|rank| rank < k))
                    .collect()
            })
            .collect();
        let question_count = queries.len();
        let em_at_k = k_values
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let hit_count = hits.iter().filter(|row| row[i]).count();
                hit_count as f64 / question_count as f64
            })
            .collect();
        Ok(EvalReport {
            k_values: k_values.to_vec(),
            hits,
            em_at_k,
            question_count,
        })
    }

    /// The frozen JSON schema: `{"k": [...], "em": [...], "n_questions": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "k": self.k_values,
            "em": self.em_at_k,
            "n_questions": self.question_count,
        })
    }

    /// Aligned text table with one Top-K column per evaluated K, scores as
    /// percentages.
    pub fn render_table(&self, label: &str) -> String {
        let mut header = format!("{:<16}", "Method");
        for k in &self.k_values {
            header.push_str(&format!("{:>10}", format!("Top-{k}")));
        }
        let mut row = format!("{label:<16}");
        for em in &self.em_at_k {
            row.push_str(&format!("{:>10.2}", em * 100.0));
        }
        format!(
            "{header}\n{row}\n({} questions)\n",
            self.question_count
        )
    }
}
