//! JSONL corpus ingestion.
//!
//! One JSON object per line:
//!
//! ```json
//! {"question_id": "q1", "question": "...", "answers": ["..."],
//!  "retrieved": [{"id": "r0", "title": "...", "text": "..."}],
//!  "generated": [{"id": "g0", "text": "..."}]}
//! ```
//!
//! Passage arrays are in retriever/generator rank order. Blank lines are
//! skipped.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use brmgr_core::types::{validate_question_record, QuestionRecord, ValidatedRecord};
use brmgr_core::ValidationError;

/// Ingestion failure.
#[derive(Debug)]
pub enum IngestError {
    Io { path: String, source: std::io::Error },
    Parse { line: usize, message: String },
    Validation { line: usize, source: ValidationError },
}

impl fmt::Display for IngestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestError::Io { path, source } => write!(f, "cannot read '{path}': {source}"),
            IngestError::Parse { line, message } => write!(f, "line {line}: {message}"),
            IngestError::Validation { line, source } => write!(f, "line {line}: {source}"),
        }
    }
}

impl std::error::Error for IngestError {}

/// Reads and validates a JSONL corpus, keeping the first `n_retrieved`
/// retrieved and `m_generated` generated passages per question by origin
/// rank.
pub fn ingest_corpus(
    path: &Path,
    m_generated: usize,
    n_retrieved: usize,
) -> Result<Vec<ValidatedRecord>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line_number = index + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: QuestionRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::Parse {
                line: line_number,
                message: e.to_string(),
            })?;
        let mut validated =
            validate_question_record(&raw).map_err(|source| IngestError::Validation {
                line: line_number,
                source,
            })?;
        validated.retrieved.sort_by_key(|p| p.origin_rank);
        validated.retrieved.truncate(n_retrieved);
        validated.generated.sort_by_key(|p| p.origin_rank);
        validated.generated.truncate(m_generated);
        records.push(validated);
    }
    Ok(records)
}
