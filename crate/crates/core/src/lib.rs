//! Bi-reranking and greedy fusion of retrieved and LLM-generated passages
//! for open-domain question answering.
//!
//! The crate is organized around five pieces:
//!
//! - [`types`]: the shared domain model (queries, passages, score matrices).
//! - [`scorer`]: teacher-forcing log-probability sources — a deterministic
//!   offline [`scorer::MockScorer`] and an HTTP [`scorer::RemoteScorer`].
//! - [`scoring`]: query-likelihood and passage-likelihood relevance scores,
//!   reranking, and combination-matrix assembly.
//! - [`matching`]: greedy pairing of generated with retrieved passages, plus
//!   Hungarian and exhaustive assignment oracles.
//! - [`evaluation`]: answer normalization and the top-K retrieval exact
//!   match metric.
//!
//! The numeric core is generic over any floating-point [`Scalar`]; the
//! pipeline-facing alias [`Score`] pins `f64`.

pub mod evaluation;
pub mod matching;
pub mod scalar;
pub mod scorer;
pub mod scoring;
pub mod types;

pub use scalar::Scalar;

/// Concrete score type used by the pipeline: mean per-token log-likelihood
/// in nats.
pub type Score = f64;

pub use types::{
    MatchedPair, Passage, Query, RelevanceMatrix, ScoredPassage, Source, ValidationError,
};
