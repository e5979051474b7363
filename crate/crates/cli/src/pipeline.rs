//! End-to-end pipeline: per-question ranking under a mode, bounded-parallel
//! execution, and exact-match evaluation.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use brmgr_core::evaluation::{EvalError, EvalReport};
use brmgr_core::matching::{flatten_pairs, greedy_match, MatchError};
use brmgr_core::scorer::LmScorer;
use brmgr_core::scoring::{
    build_relevance_matrix, rerank, score_passages_by_passage_likelihood,
    score_passages_by_query_likelihood, ScoringError,
};
use brmgr_core::types::ValidatedRecord;
use brmgr_core::{Passage, Query, Score, ScoredPassage};

use crate::config::{ConfigError, Mode, PipelineConfig};

/// A passage in its final position for one question, with the mode's score
/// when the mode scores passages.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPassage {
    pub passage: Passage,
    pub score: Option<Score>,
    pub rank: usize,
}

/// One question's final passage ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionResult {
    pub query: Query,
    pub ranked: Vec<RankedPassage>,
}

/// Result of a full pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub questions: Vec<QuestionResult>,
    pub report: EvalReport,
    /// Questions dropped under `skip_errors`.
    pub skipped: usize,
}

/// Why one question could not be ranked.
#[derive(Debug, Clone, PartialEq)]
pub enum QuestionFailure {
    Scoring(ScoringError),
    Matching(MatchError),
}

impl fmt::Display for QuestionFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionFailure::Scoring(e) => write!(f, "{e}"),
            QuestionFailure::Matching(e) => write!(f, "{e}"),
        }
    }
}

impl From<ScoringError> for QuestionFailure {
    fn from(e: ScoringError) -> Self {
        QuestionFailure::Scoring(e)
    }
}

impl From<MatchError> for QuestionFailure {
    fn from(e: MatchError) -> Self {
        QuestionFailure::Matching(e)
    }
}

/// Pipeline failure.
#[derive(Debug)]
pub enum PipelineError {
    Config(ConfigError),
    Question {
        question_id: String,
        source: QuestionFailure,
    },
    Eval(EvalError),
}

impl PipelineError {
    /// True when the failure came from the scoring backend (transport or
    /// rejection), as opposed to invalid input.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            PipelineError::Question {
                source: QuestionFailure::Scoring(ScoringError::Scorer(e)),
                ..
            } if matches!(
                e,
                brmgr_core::scorer::ScorerError::BackendUnavailable { .. }
                    | brmgr_core::scorer::ScorerError::BackendRejected { .. }
            )
        )
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Config(e) => write!(f, "{e}"),
            PipelineError::Question {
                question_id,
                source,
            } => write!(f, "question '{question_id}': {source}"),
            PipelineError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PipelineError {}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::Config(e)
    }
}

impl From<EvalError> for PipelineError {
    fn from(e: EvalError) -> Self {
        PipelineError::Eval(e)
    }
}

fn origin_order(passages: &[Passage]) -> Vec<RankedPassage> {
    passages
        .iter()
        .enumerate()
        .map(|(rank, passage)| RankedPassage {
            passage: passage.clone(),
            score: None,
            rank,
        })
        .collect()
}

/// Alternates retrieved and generated passages by origin rank
/// (r0, g0, r1, g1, ...), appending the longer side's remainder.
fn interleave(retrieved: &[Passage], generated: &[Passage]) -> Vec<RankedPassage> {
    let mut out = Vec::with_capacity(retrieved.len() + generated.len());
    let mut retr = retrieved.iter();
    let mut gen = generated.iter();
    loop {
        match (retr.next(), gen.next()) {
            (None, None) => break,
            (r, g) => {
                if let Some(p) = r {
                    out.push(p.clone());
                }
                if let Some(p) = g {
                    out.push(p.clone());
                }
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(rank, passage)| RankedPassage {
            passage,
            score: None,
            rank,
        })
        .collect()
}

fn ranked_from_scored(scored: Vec<ScoredPassage>) -> Vec<RankedPassage> {
    scored
        .into_iter()
        .map(|sp| RankedPassage {
            passage: sp.passage,
            score: Some(sp.score),
            rank: sp.rank,
        })
        .collect()
}

/// Ranks one question's passages under the configured mode.
pub fn rank_question(
    config: &PipelineConfig,
    record: &ValidatedRecord,
    scorer: &dyn LmScorer,
) -> Result<Vec<RankedPassage>, QuestionFailure> {
    match config.mode {
        Mode::RetriOrigin => Ok(origin_order(&record.retrieved)),
        Mode::GenOrigin => Ok(origin_order(&record.generated)),
        Mode::OriginCombi => Ok(interleave(&record.retrieved, &record.generated)),
        Mode::RetriRerank => {
            let scores = score_passages_by_query_likelihood(
                &record.query,
                &record.retrieved,
                scorer,
                &config.template,
                config.max_in_flight,
            )?;
            Ok(ranked_from_scored(rerank(&record.retrieved, &scores)?))
        }
        Mode::GenRerank => {
            let scores = score_passages_by_passage_likelihood(
                &record.query,
                &record.generated,
                scorer,
                config.max_in_flight,
            )?;
            Ok(ranked_from_scored(rerank(&record.generated, &scores)?))
        }
        Mode::AblationQGen => {
            let scores = score_passages_by_query_likelihood(
                &record.query,
                &record.generated,
                scorer,
                &config.template,
                config.max_in_flight,
            )?;
            Ok(ranked_from_scored(rerank(&record.generated, &scores)?))
        }
        Mode::Brmgr => {
            let retr_scores = score_passages_by_query_likelihood(
                &record.query,
                &record.retrieved,
                scorer,
                &config.template,
                config.max_in_flight,
            )?;
            let gen_scores = score_passages_by_passage_likelihood(
                &record.query,
                &record.generated,
                scorer,
                config.max_in_flight,
            )?;
            let retr_ranked = rerank(&record.retrieved, &retr_scores)?;
            let gen_ranked = rerank(&record.generated, &gen_scores)?;
            let matrix = build_relevance_matrix(&gen_ranked, &retr_ranked)?;
            let pairs = greedy_match(&matrix);
            let flat = flatten_pairs(&pairs, &gen_ranked, &retr_ranked, config.flatten_policy)?;

            // Recover per-passage scores; (source, origin_rank) is unique.
            let mut score_of = std::collections::HashMap::new();
            for sp in gen_ranked.iter().chain(retr_ranked.iter()) {
                score_of.insert((sp.passage.source, sp.passage.origin_rank), sp.score);
            }
            Ok(flat
                .into_iter()
                .enumerate()
                .map(|(rank, passage)| {
                    let score = score_of.get(&(passage.source, passage.origin_rank)).copied();
                    RankedPassage {
                        passage,
                        score,
                        rank,
                    }
                })
                .collect())
        }
    }
}

/// Runs the configured mode over the whole corpus with bounded parallelism
/// and evaluates top-K exact match.
///
/// Questions are processed by up to `config.workers` threads; results are
/// collected and ordered by input position before evaluation, so
/// concurrency never changes the output. Without `skip_errors` the run
/// fails on the failing question with the lowest input index.
pub fn run_pipeline(
    config: &PipelineConfig,
    corpus: &[ValidatedRecord],
    scorer: &dyn LmScorer,
) -> Result<RunOutput, PipelineError> {
    config.validate()?;

    type Slot = Option<Result<Vec<RankedPassage>, QuestionFailure>>;
    let worker_count = config.workers.max(1).min(corpus.len().max(1));
    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Vec<Slot>> = Mutex::new(vec![None; corpus.len()]);

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::Relaxed);
                if index >= corpus.len() {
                    break;
                }
                let outcome = rank_question(config, &corpus[index], scorer);
                slots.lock().expect("result lock")[index] = Some(outcome);
            });
        }
    });

    let results = slots.into_inner().expect("result lock");
    let mut questions = Vec::with_capacity(corpus.len());
    let mut skipped = 0usize;
    for (record, slot) in corpus.iter().zip(results) {
        match slot.expect("every question processed") {
            Ok(ranked) => questions.push(QuestionResult {
                query: record.query.clone(),
                ranked,
            }),
            Err(source) if config.skip_errors => {
                let _ = source;
                skipped += 1;
            }
            Err(source) => {
                return Err(PipelineError::Question {
                    question_id: record.query.id.clone(),
                    source,
                });
            }
        }
    }

    let ranked_passages: Vec<Vec<Passage>> = questions
        .iter()
        .map(|q| q.ranked.iter().map(|rp| rp.passage.clone()).collect())
        .collect();
    let queries: Vec<Query> = questions.iter().map(|q| q.query.clone()).collect();
    let report = EvalReport::compute(&ranked_passages, &queries, &config.k_values)?;

    Ok(RunOutput {
        questions,
        report,
        skipped,
    })
}
