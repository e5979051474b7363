//! Pipeline driver behind the `brmgr` binary: corpus ingestion, pipeline
//! modes, score caching, output emission, and the matching self-check.

pub mod cache;
pub mod config;
pub mod emit;
pub mod ingest;
pub mod matchcheck;
pub mod pipeline;
