//! Output emission: fused passage lists, the exact-match report, and its
//! text table.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use brmgr_core::{Score, Source};
use serde::Serialize;

use crate::pipeline::RunOutput;

pub const FUSED_FILE: &str = "fused.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TABLE_FILE: &str = "report.txt";

/// Emission failure (exit code 3 territory).
#[derive(Debug)]
pub struct EmitError {
    pub path: String,
    pub source: std::io::Error,
}

impl fmt::Display for EmitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write '{}': {}", self.path, self.source)
    }
}

impl std::error::Error for EmitError {}

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitPaths {
    pub fused: PathBuf,
    pub report_json: PathBuf,
    pub report_table: PathBuf,
}

#[derive(Serialize)]
struct FusedPassage<'a> {
    id: &'a str,
    source: Source,
    score: Option<Score>,
    rank: usize,
}

#[derive(Serialize)]
struct FusedLine<'a> {
    question_id: &'a str,
    passages: Vec<FusedPassage<'a>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmitError + '_ {
    move |source| EmitError {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the fused passage lists (one JSON line per question), the report
/// JSON, and the aligned text table into `out_dir`.
pub fn emit_outputs(
    output: &RunOutput,
    out_dir: &Path,
    label: &str,
) -> Result<EmitPaths, EmitError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let fused = out_dir.join(FUSED_FILE);
    {
        let mut writer = std::io::BufWriter::new(fs::File::create(&fused).map_err(io_err(&fused))?);
        for question in &output.questions {
            let line = FusedLine {
                question_id: &question.query.id,
                passages: question
                    .ranked
                    .iter()
                    .map(|rp| FusedPassage {
                        id: &rp.passage.id,
                        source: rp.passage.source,
                        score: rp.score,
                        rank: rp.rank,
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut writer, &line)
                .map_err(|e| EmitError {
                    path: fused.display().to_string(),
                    source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
                })?;
            writer.write_all(b"\n").map_err(io_err(&fused))?;
        }
        writer.flush().map_err(io_err(&fused))?;
    }

    let report_json = out_dir.join(REPORT_JSON_FILE);
    let mut json = serde_json::to_string_pretty(&output.report.to_json()).expect("report JSON");
    json.push('\n');
    fs::write(&report_json, json).map_err(io_err(&report_json))?;

    let report_table = out_dir.join(REPORT_TABLE_FILE);
    fs::write(&report_table, render_report(output, label)).map_err(io_err(&report_table))?;

    Ok(EmitPaths {
        fused,
        report_json,
        report_table,
    })
}

/// The text table, plus a prominent skipped-question count when any
/// question was dropped.
pub fn render_report(output: &RunOutput, label: &str) -> String {
    let mut table = output.report.render_table(label);
    if output.skipped > 0 {
        table.push_str(&format!(
            "WARNING: {} question(s) skipped due to errors; metrics cover the remainder.\n",
            output.skipped
        ));
    }
    table
}
