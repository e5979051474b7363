//! `brmgr` — rerank and fuse retrieved/generated passage corpora and score
//! them with top-K exact match.
//!
//! Exit codes: 0 success, 1 validation or check failure, 2 scoring backend
//! failure, 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use brmgr_core::evaluation::EvalReport;
use brmgr_core::matching::FlattenPolicy;
use brmgr_core::scorer::{LmScorer, MockScorer, RemoteConfig, RemoteScorer};
use brmgr_core::scoring::PromptTemplate;
use brmgr_core::{Passage, Query};
use clap::{Args, Parser, Subcommand};

use brmgr_cli::cache::{CachingScorer, ScoreCache, CACHE_FILE};
use brmgr_cli::config::{Mode, PipelineConfig, RemoteSettings, ScorerChoice};
use brmgr_cli::emit::{emit_outputs, render_report};
use brmgr_cli::ingest::{ingest_corpus, IngestError};
use brmgr_cli::matchcheck::{run_match_check, DEFAULT_SEED};
use brmgr_cli::pipeline::run_pipeline;

#[derive(Parser)]
#[command(
    name = "brmgr",
    version,
    about = "Bi-rerank and fuse retrieved and LLM-generated passages for open-domain QA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a pipeline mode over a corpus; write fused lists and an EM report
    Run(RunArgs),
    /// Compute top-K exact match for an already-ranked corpus
    Eval(EvalArgs),
    /// Verify greedy/Hungarian/exhaustive matching agreement properties
    MatchCheck(MatchCheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline variant
    #[arg(long, value_enum)]
    mode: Mode,
    /// JSONL corpus path
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Log-probability source
    #[arg(long, value_enum, default_value_t = ScorerChoice::Mock)]
    scorer: ScorerChoice,
    /// Remote scoring endpoint URL (required with --scorer remote)
    #[arg(long)]
    endpoint: Option<String>,
    /// Remote request timeout in seconds
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
    /// Retry count for retryable backend failures
    #[arg(long, default_value_t = 2)]
    retries: u32,
    /// K values for the exact-match report
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    k: Vec<usize>,
    /// Generated passages kept per question
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Retrieved passages kept per question
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Pair expansion order for fused output
    #[arg(long, value_enum, default_value_t = PolicyArg::RetrievedFirst)]
    policy: PolicyArg,
    /// Concurrent questions
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Concurrent scoring requests per question
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// Skip failing questions instead of aborting; skipped counts are
    /// reported
    #[arg(long)]
    skip_errors: bool,
    /// Override the passage prefix of the scoring prompt
    #[arg(long)]
    passage_prefix: Option<String>,
    /// Override the verbalizer of the scoring prompt
    #[arg(long)]
    verbalizer: Option<String>,
    /// Override the separator of the scoring prompt
    #[arg(long)]
    separator: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL corpus path (passage lists already in rank order)
    #[arg(long)]
    corpus: PathBuf,
    /// Which passage list to evaluate
    #[arg(long, value_enum, default_value_t = SourceArg::Retrieved)]
    source: SourceArg,
    /// K values for the exact-match report
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    k: Vec<usize>,
}

#[derive(Args)]
struct MatchCheckArgs {
    /// Random factorized matrices to test
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Largest matrix size
    #[arg(long, default_value_t = 6)]
    max_size: usize,
    /// RNG seed
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PolicyArg {
    RetrievedFirst,
    GeneratedFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SourceArg {
    Retrieved,
    Generated,
}

enum CliError {
    Validation(String),
    Backend(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Backend(m) | CliError::Io(m) => m,
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match &e {
            IngestError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::MatchCheck(args) => match_check(args),
    }
}

fn build_config(args: &RunArgs) -> PipelineConfig {
    let mut template = PromptTemplate::default();
    if let Some(prefix) = &args.passage_prefix {
        template.passage_prefix = prefix.clone();
    }
    if let Some(verbalizer) = &args.verbalizer {
        template.verbalizer = verbalizer.clone();
    }
    if let Some(separator) = &args.separator {
        template.separator = separator.clone();
    }
    PipelineConfig {
        mode: args.mode,
        scorer: args.scorer,
        remote: RemoteSettings {
            endpoint: args.endpoint.clone(),
            timeout_secs: args.timeout_secs,
            retries: args.retries,
        },
        m_generated: args.m,
        n_retrieved: args.n,
        k_values: args.k.clone(),
        flatten_policy: match args.policy {
            PolicyArg::RetrievedFirst => FlattenPolicy::RetrievedFirst,
            PolicyArg::GeneratedFirst => FlattenPolicy::GeneratedFirst,
        },
        template,
        max_in_flight: args.max_in_flight,
        workers: args.workers,
        skip_errors: args.skip_errors,
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let config = build_config(&args);
    config
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let corpus = ingest_corpus(&args.corpus, config.m_generated, config.n_retrieved)?;

    let cache_path = args.out.join(CACHE_FILE);
    let cache = Arc::new(
        ScoreCache::load(&cache_path)
            .map_err(|e| CliError::Io(format!("cannot read cache '{}': {e}", cache_path.display())))?,
    );
    let scorer: Box<dyn LmScorer> = match config.scorer {
        ScorerChoice::Mock => Box::new(CachingScorer::new(MockScorer, cache.clone())),
        ScorerChoice::Remote => {
            let endpoint = config.remote.endpoint.clone().unwrap_or_default();
            let remote_config = RemoteConfig {
                timeout_secs: config.remote.timeout_secs,
                retries: config.remote.retries,
                ..RemoteConfig::new(endpoint)
            };
            Box::new(CachingScorer::new(RemoteScorer::new(remote_config), cache.clone()))
        }
    };

    let output = run_pipeline(&config, &corpus, scorer.as_ref()).map_err(|e| {
        if e.is_backend() {
            CliError::Backend(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    })?;

    let paths = emit_outputs(&output, &args.out, config.mode.label())
        .map_err(|e| CliError::Io(e.to_string()))?;
    if config.mode.needs_scorer() {
        cache
            .write(&cache_path)
            .map_err(|e| CliError::Io(format!("cannot write cache '{}': {e}", cache_path.display())))?;
    }

    print!("{}", render_report(&output, config.mode.label()));
    println!(
        "wrote {}, {}, {}",
        paths.fused.display(),
        paths.report_json.display(),
        paths.report_table.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(CliError::Validation(String::from("K values must be >= 1")));
    }
    let corpus = ingest_corpus(&args.corpus, usize::MAX, usize::MAX)?;
    let label = match args.source {
        SourceArg::Retrieved => "retrieved",
        SourceArg::Generated => "generated",
    };
    let ranked: Vec<Vec<Passage>> = corpus
        .iter()
        .map(|record| match args.source {
            SourceArg::Retrieved => record.retrieved.clone(),
            SourceArg::Generated => record.generated.clone(),
        })
        .collect();
    let queries: Vec<Query> = corpus.iter().map(|r| r.query.clone()).collect();
    let report = EvalReport::compute(&ranked, &queries, &args.k)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    print!("{}", report.render_table(label));
    println!("{}", report.to_json());
    Ok(())
}

fn match_check(args: MatchCheckArgs) -> Result<(), CliError> {
    if args.max_size == 0 || args.max_size > 8 {
        return Err(CliError::Validation(String::from(
            "max-size must be between 1 and 8",
        )));
    }
    let report = run_match_check(args.instances.max(1), args.max_size, args.seed);
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(String::from(
            "matching self-check failed",
        )))
    }
}
