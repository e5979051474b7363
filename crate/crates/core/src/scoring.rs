//! Relevance scores and combination matrices.
//!
//! Retrieved passages are scored by the zero-shot likelihood of the query
//! conditioned on the passage (question-generation prompt); generated
//! passages by the likelihood of the passage conditioned on the query. Both
//! are mean per-token log-likelihoods in nats, and their sum forms the
//! log-space combination score for a (generated, retrieved) pair.

use std::fmt;

use crate::scorer::{BatchError, LmScorer, ScoreRequest, ScorerError};
use crate::types::MatrixError;
use crate::{Passage, Query, RelevanceMatrix, Scalar, Score, ScoredPassage};

/// Prompt pieces used when scoring retrieved passages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    /// Prefix placed before the passage title/text.
    pub passage_prefix: String,
    /// Instruction appended after the passage. Must be non-empty.
    pub verbalizer: String,
    /// Separator between passage text and verbalizer.
    pub separator: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            passage_prefix: String::from("passage: "),
            verbalizer: String::from("Please write a question based on this passage"),
            separator: String::from("\n"),
        }
    }
}

/// Prefix placed before the query when scoring generated passages.
pub const QUESTION_PREFIX: &str = "question: ";
/// Header that closes the generated-passage conditioning context.
pub const PASSAGE_HEADER: &str = "passage:";

/// Scoring failure.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoringError {
    LengthMismatch { passages: usize, scores: usize },
    NonFiniteScore { index: usize },
    EmptyInput,
    Scorer(ScorerError),
}

impl fmt::Display for ScoringError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoringError::LengthMismatch { passages, scores } => {
                write!(f, "{passages} passages but {scores} scores")
            }
            ScoringError::NonFiniteScore { index } => {
                write!(f, "non-finite score at index {index}")
            }
            ScoringError::EmptyInput => f.write_str("scored passage lists must be non-empty"),
            ScoringError::Scorer(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ScoringError {}

impl From<ScorerError> for ScoringError {
    fn from(e: ScorerError) -> Self {
        ScoringError::Scorer(e)
    }
}

impl From<BatchError> for ScoringError {
    fn from(e: BatchError) -> Self {
        ScoringError::Scorer(e.source)
    }
}

/// Builds the question-generation prompt for a passage:
/// `passage_prefix + title + " " + text + separator + verbalizer`, with the
/// title segment omitted when the passage has none. The exact byte layout
/// is frozen by golden tests.
pub fn build_query_generation_prompt(passage: &Passage, template: &PromptTemplate) -> String {
    let title_len = passage.title.as_ref().map_or(0, |t| t.len() + 1);
    let mut prompt = String::with_capacity(
        template.passage_prefix.len()
            + title_len
            + passage.text.len()
            + template.separator.len()
            + template.verbalizer.len(),
    );
    prompt.push_str(&template.passage_prefix);
    if let Some(title) = &passage.title {
        prompt.push_str(title);
        prompt.push(' ');
    }
    prompt.push_str(&passage.text);
    prompt.push_str(&template.separator);
    prompt.push_str(&template.verbalizer);
    prompt
}

/// Builds the conditioning context used when scoring a generated passage
/// against its query: `"question: " + query text + "\n" + "passage:"`.
/// Frozen by a golden test.
pub fn build_passage_generation_context(query: &Query) -> String {
    let mut context =
        String::with_capacity(QUESTION_PREFIX.len() + query.text.len() + 1 + PASSAGE_HEADER.len());
    context.push_str(QUESTION_PREFIX);
    context.push_str(&query.text);
    context.push('\n');
    context.push_str(PASSAGE_HEADER);
    context
}

/// Mean log-likelihood of the query conditioned on a passage: the prompt is
/// the question-generation prompt, the continuation is the query text.
///
/// The math is source-agnostic; the pipeline applies it to retrieved
/// passages.
pub fn score_query_given_passage(
    query: &Query,
    passage: &Passage,
    scorer: &dyn LmScorer,
    template: &PromptTemplate,
) -> Result<Score, ScoringError> {
    let request = ScoreRequest::new(
        build_query_generation_prompt(passage, template),
        query.text.clone(),
    );
    Ok(scorer.score_continuation(&request)?.mean())
}

/// Mean log-likelihood of a generated passage conditioned on the query: the
/// context is the query (see [`build_passage_generation_context`]), the
/// continuation is the passage text.
pub fn score_passage_given_query(
    query: &Query,
    passage: &Passage,
    scorer: &dyn LmScorer,
) -> Result<Score, ScoringError> {
    let request = ScoreRequest::new(build_passage_generation_context(query), passage.text.clone());
    Ok(scorer.score_continuation(&request)?.mean())
}

/// Mean log-likelihood of the query conditioned on a *generated* passage —
/// the same computation as [`score_query_given_passage`], used only by the
/// ablation pipeline mode that reranks generated passages by question
/// likelihood instead of passage likelihood.
pub fn score_question_given_generated(
    query: &Query,
    passage: &Passage,
    scorer: &dyn LmScorer,
    template: &PromptTemplate,
) -> Result<Score, ScoringError> {
    score_query_given_passage(query, passage, scorer, template)
}

fn score_requests(
    requests: Vec<ScoreRequest>,
    scorer: &dyn LmScorer,
    max_in_flight: usize,
) -> Result<Vec<Score>, ScoringError> {
    let results = scorer.score_batch(&requests, max_in_flight)?;
    Ok(results.iter().map(|probs| probs.mean()).collect())
}

/// Scores every passage by query likelihood (one request per passage, at
/// most `max_in_flight` concurrent). Results align with `passages`.
pub fn score_passages_by_query_likelihood(
    query: &Query,
    passages: &[Passage],
    scorer: &dyn LmScorer,
    template: &PromptTemplate,
    max_in_flight: usize,
) -> Result<Vec<Score>, ScoringError> {
    let requests = passages
        .iter()
        .map(|p| ScoreRequest::new(build_query_generation_prompt(p, template), query.text.clone()))
        .collect();
    score_requests(requests, scorer, max_in_flight)
}

/// Scores every passage by passage likelihood conditioned on the query.
/// Results align with `passages`.
pub fn score_passages_by_passage_likelihood(
    query: &Query,
    passages: &[Passage],
    scorer: &dyn LmScorer,
    max_in_flight: usize,
) -> Result<Vec<Score>, ScoringError> {
    let context = build_passage_generation_context(query);
    let requests = passages
        .iter()
        .map(|p| ScoreRequest::new(context.clone(), p.text.clone()))
        .collect();
    score_requests(requests, scorer, max_in_flight)
}

/// Sorts passages by score descending, ties broken by ascending
/// `origin_rank`, and assigns ranks `0..len`.
pub fn rerank<T: Scalar>(
    passages: &[Passage],
    scores: &[T],
) -> Result<Vec<ScoredPassage<T>>, ScoringError> {
    if passages.len() != scores.len() {
        return Err(ScoringError::LengthMismatch {
            passages: passages.len(),
            scores: scores.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ScoringError::NonFiniteScore { index });
    }
    let mut order: Vec<usize> = (0..passages.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores checked finite")
            .then(passages[a].origin_rank.cmp(&passages[b].origin_rank))
    });
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(rank, index)| ScoredPassage {
            passage: passages[index].clone(),
            score: scores[index],
            rank,
        })
        .collect())
}

/// Assembles the M×N log-space combination matrix from scored generated
/// (rows) and retrieved (columns) passages.
pub fn build_relevance_matrix<T: Scalar>(
    gen_scored: &[ScoredPassage<T>],
    retr_scored: &[ScoredPassage<T>],
) -> Result<RelevanceMatrix<T>, ScoringError> {
    let gen_scores: Vec<T> = gen_scored.iter().map(|sp| sp.score).collect();
    let retr_scores: Vec<T> = retr_scored.iter().map(|sp| sp.score).collect();
    RelevanceMatrix::from_factors(gen_scores, retr_scores).map_err(|e| match e {
        MatrixError::Empty => ScoringError::EmptyInput,
        MatrixError::NonFinite { index, .. } => ScoringError::NonFiniteScore { index },
    })
}
