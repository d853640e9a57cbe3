//! Append-only JSON-lines trial log.
//!
//! One record per line, each carrying a monotonically increasing `seq` and a
//! `kind` of `run_created`, `trial`, `command` or `status_change`.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ControlCommand, Run, RunStatus, Trial};
use crate::error::{ErrorCode, Rejection, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    RunCreated {
        run: Run,
    },
    Trial {
        trial: Trial,
    },
    Command {
        command: ControlCommand,
        /// Space version in force after the command.
        space_version: u64,
    },
    StatusChange {
        from: RunStatus,
        to: RunStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub record: Record,
}

impl LogEntry {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log entries always serialize")
    }
}

/// In-memory copy of every entry plus an optional file it is mirrored to.
#[derive(Debug, Default)]
pub struct TrialLog {
    entries: Vec<LogEntry>,
    sink: Option<BufWriter<File>>,
}

impl TrialLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path` for appending; existing content is left in place.
    pub fn open_file(path: &Path, entries: Vec<LogEntry>) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            entries,
            sink: Some(BufWriter::new(file)),
        })
    }

    pub fn with_entries(entries: Vec<LogEntry>) -> Self {
        Self {
            entries,
            sink: None,
        }
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn next_seq(&self) -> u64 {
        self.entries.last().map_or(1, |e| e.seq + 1)
    }

    /// Writes one full line and flushes, so the file always ends at a record boundary
    /// unless the process dies mid-write.
    pub fn append(&mut self, record: Record) -> Result<()> {
        let entry = LogEntry {
            seq: self.next_seq(),
            record,
        };
        if let Some(sink) = &mut self.sink {
            let mut line = entry.to_line();
            line.push('\n');
            sink.write_all(line.as_bytes())?;
            sink.flush()?;
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

/// Outcome of parsing a log: the entries and whether a torn final line was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub entries: Vec<LogEntry>,
    pub dropped_torn_line: bool,
}

/// Parses JSON lines. A final line without its newline that fails to parse is
/// treated as torn and dropped; any other bad line fails with its 1-based number.
pub fn parse_log(text: &str) -> Result<ParsedLog> {
    let mut entries = Vec::new();
    let mut dropped_torn_line = false;
    let ends_clean = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<LogEntry>(line) {
            Ok(entry) => {
                if let Some(prev) = entries.last().map(|e: &LogEntry| e.seq) {
                    if entry.seq <= prev {
                        return Err(corrupt(i + 1, "sequence number does not increase"));
                    }
                }
                entries.push(entry);
            }
            Err(_) if i + 1 == lines.len() && !ends_clean => {
                tracing::warn!(line = i + 1, "dropping torn final log line");
                dropped_torn_line = true;
            }
            Err(e) => return Err(corrupt(i + 1, &e.to_string())),
        }
    }
    Ok(ParsedLog {
        entries,
        dropped_torn_line,
    })
}

fn corrupt(line: usize, message: &str) -> Rejection {
    Rejection::new(ErrorCode::CorruptLog, format!("line {line}: {message}"))
        .with_detail(serde_json::json!({ "line": line }))
}

/// Flat CSV export of a trial list, one column per hyperparameter seen.
pub fn trials_to_csv(trials: &[Trial]) -> Result<String> {
    let names: std::collections::BTreeSet<&str> =
        trials.iter().flat_map(|t| t.config.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trial_id", "algorithm", "hyperpartition_id", "status", "score", "elapsed_secs", "error"];
    header.extend(names.iter().copied());
    w.write_record(&header).map_err(csv_error)?;
    for t in trials {
        let mut row = vec![
            t.trial_id.to_string(),
            t.algorithm.clone(),
            t.hyperpartition_id.clone(),
            if t.is_ok() { "ok".into() } else { "error".into() },
            t.score.map(|s| s.to_string()).unwrap_or_default(),
            t.elapsed_secs.to_string(),
            t.error.clone().unwrap_or_default(),
        ];
        row.extend(names.iter().map(|n| t.config.get(*n).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Rejection::new(ErrorCode::Io, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_error(e: csv::Error) -> Rejection {
    Rejection::new(ErrorCode::Io, e.to_string())
}
