//! Question datasets: JSON lines of `{id, question, sparql, answers?, type?}`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer::AnswerSet;
use crate::kb::KnowledgeBase;
use crate::query::{canonical_answers, execute, QueryError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub sparql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answers: Option<AnswerSet>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub qtype: Option<String>,
}

impl DatasetRecord {
    /// Recorded answers, or the result of evaluating the gold query.
    pub fn gold_answers(&self, kb: &KnowledgeBase) -> Result<AnswerSet, QueryError> {
        match &self.answers {
            Some(a) => Ok(a.clone()),
            None => execute(&self.sparql, kb).map(|rs| canonical_answers(&rs)),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out: Vec<DatasetRecord> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Parse { line: i + 1, message: e.to_string() })?;
        if !ids.insert(rec.id.clone()) {
            return Err(DatasetError::DuplicateId { line: i + 1, id: rec.id });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_dataset(records: &[DatasetRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
