//! Pipeline configuration and validation.

use std::fmt;

use brmgr_core::matching::FlattenPolicy;
use brmgr_core::scoring::PromptTemplate;
use serde::{Deserialize, Serialize};

/// Pipeline variant to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Retrieved passages in input order.
    RetriOrigin,
    /// Retrieved passages reranked by query likelihood.
    RetriRerank,
    /// Generated passages in input order.
    GenOrigin,
    /// Generated passages reranked by passage likelihood.
    GenRerank,
    /// Retrieved and generated interleaved in input order, no reranking.
    OriginCombi,
    /// Bi-rerank both sides and fuse via greedy matching.
    Brmgr,
    /// Ablation: generated passages reranked by question likelihood.
    AblationQGen,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::RetriOrigin => "retri-origin",
            Mode::RetriRerank => "retri-rerank",
            Mode::GenOrigin => "gen-origin",
            Mode::GenRerank => "gen-rerank",
            Mode::OriginCombi => "origin-combi",
            Mode::Brmgr => "brmgr",
            Mode::AblationQGen => "ablation-qgen",
        }
    }

    pub fn needs_retrieved(self) -> bool {
        !matches!(self, Mode::GenOrigin | Mode::GenRerank | Mode::AblationQGen)
    }

    pub fn needs_generated(self) -> bool {
        !matches!(self, Mode::RetriOrigin | Mode::RetriRerank)
    }

    pub fn needs_scorer(self) -> bool {
        matches!(
            self,
            Mode::RetriRerank | Mode::GenRerank | Mode::Brmgr | Mode::AblationQGen
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which log-probability source backs the scoring operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScorerChoice {
    /// Deterministic offline word-overlap scorer.
    Mock,
    /// Remote HTTP scoring endpoint.
    Remote,
}

/// Remote endpoint settings (only used with [`ScorerChoice::Remote`]).
#[derive(Debug, Clone, Default)]
pub struct RemoteSettings {
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

/// Full configuration for one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub scorer: ScorerChoice,
    pub remote: RemoteSettings,
    /// Generated passages kept per question (by origin rank).
    pub m_generated: usize,
    /// Retrieved passages kept per question (by origin rank).
    pub n_retrieved: usize,
    pub k_values: Vec<usize>,
    pub flatten_policy: FlattenPolicy,
    pub template: PromptTemplate,
    pub max_in_flight: usize,
    pub workers: usize,
    /// Skip questions that fail instead of failing the run; skipped counts
    /// are reported prominently.
    pub skip_errors: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Brmgr,
            scorer: ScorerChoice::Mock,
            remote: RemoteSettings {
                endpoint: None,
                timeout_secs: 30,
                retries: 2,
            },
            m_generated: 10,
            n_retrieved: 10,
            k_values: vec![1, 3, 5],
            flatten_policy: FlattenPolicy::RetrievedFirst,
            template: PromptTemplate::default(),
            max_in_flight: 4,
            workers: 4,
            skip_errors: false,
        }
    }
}

/// Configuration rejected before the run starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mode.needs_generated() && self.m_generated < 1 {
            return Err(ConfigError(format!(
                "mode {} requires m_generated >= 1",
                self.mode
            )));
        }
        if self.mode.needs_retrieved() && self.n_retrieved < 1 {
            return Err(ConfigError(format!(
                "mode {} requires n_retrieved >= 1",
                self.mode
            )));
        }
        if self.k_values.is_empty() {
            return Err(ConfigError(String::from("at least one K value is required")));
        }
        if self.k_values.contains(&0) {
            return Err(ConfigError(String::from("K values must be >= 1")));
        }
        if self.template.verbalizer.is_empty() {
            return Err(ConfigError(String::from("verbalizer must be non-empty")));
        }
        if self.scorer == ScorerChoice::Remote
            && self.mode.needs_scorer()
            && self.remote.endpoint.as_deref().is_none_or(str::is_empty)
        {
            return Err(ConfigError(String::from(
                "remote scorer requires --endpoint",
            )));
        }
        Ok(())
    }
}
