//! Corpus-level processing behind the command-line tool.
//!
//! A corpus is UTF-8 text with one formula per line, optionally prefixed by
//! the cell it lives in and a tab (`B7\t=IF(...)`). Blank lines are skipped.

pub mod generator;
pub mod report;
pub mod stats;
pub mod verify;

use serde::{Deserialize, Serialize};

use crate::ast::{CellAddr, Formula};
use crate::engine::{refactor_formula, EngineConfig, RefactorResult};
use crate::par::{item_seed, map_indexed, Execution};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLine {
    /// 1-based line number in the input.
    pub line: usize,
    pub anchor: Option<CellAddr>,
    pub formula: String,
}

impl CorpusLine {
    pub fn to_formula(&self) -> Formula {
        Formula {
            source: self.formula.clone(),
            anchor: self.anchor,
        }
    }
}

/// Splits corpus text into lines. A line whose tab prefix is not a cell
/// address is kept whole, so it later fails to parse and gets reported.
pub fn read_corpus(text: &str) -> Vec<CorpusLine> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let l = l.trim_end_matches('\r');
            let (anchor, formula) = match l.split_once('\t') {
                Some((a, f)) => match a.trim().parse::<CellAddr>() {
                    Ok(addr) => (Some(addr), f.to_string()),
                    Err(_) => (None, l.to_string()),
                },
                None => (None, l.to_string()),
            };
            CorpusLine {
                line: i + 1,
                anchor,
                formula,
            }
        })
        .collect()
}

/// Writes lines back in corpus format.
pub fn write_corpus(lines: &[CorpusLine]) -> String {
    let mut out = String::new();
    for l in lines {
        if let Some(a) = l.anchor {
            out.push_str(&a.to_string());
            out.push('\t');
        }
        out.push_str(&l.formula);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Refactored(RefactorResult),
    Failed { original: String, error: String },
}

/// One output line of a refactoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub line: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<CellAddr>,
    #[serde(flatten)]
    pub outcome: Outcome,
}

impl Record {
    pub fn result(&self) -> Option<&RefactorResult> {
        match &self.outcome {
            Outcome::Refactored(r) => Some(r),
            Outcome::Failed { .. } => None,
        }
    }

    pub fn error(&self) -> Option<&str> {
        match &self.outcome {
            Outcome::Refactored(_) => None,
            Outcome::Failed { error, .. } => Some(error),
        }
    }

    pub fn original(&self) -> &str {
        match &self.outcome {
            Outcome::Refactored(r) => &r.original,
            Outcome::Failed { original, .. } => original,
        }
    }
}

/// Refactors one corpus line. Each line verifies under its own seed derived
/// from the configured one, so results do not depend on scheduling.
pub fn refactor_line(line: &CorpusLine, cfg: &EngineConfig) -> Record {
    let cfg = EngineConfig {
        seed: item_seed(cfg.seed, line.line as u64),
        ..cfg.clone()
    };
    let outcome = match refactor_formula(&line.to_formula(), &cfg) {
        Ok(r) => Outcome::Refactored(r),
        Err(e) => Outcome::Failed {
            original: line.formula.trim().to_string(),
            error: e.to_string(),
        },
    };
    Record {
        line: line.line,
        anchor: line.anchor,
        outcome,
    }
}

pub fn refactor_corpus(lines: &[CorpusLine], cfg: &EngineConfig, exec: Execution) -> Vec<Record> {
    map_indexed(lines, exec, |_, l| refactor_line(l, cfg))
}

pub fn records_to_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<Record>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
