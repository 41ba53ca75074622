//! LogHub structured CSV files (`*_structured.csv`).

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EvalError, Result};

/// Raw log contents with one ground-truth label per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub lines: Vec<String>,
    pub labels: Vec<String>,
}

impl LabeledCorpus {
    pub fn new(lines: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if lines.len() != labels.len() {
            return Err(EvalError::InvalidInput(format!(
                "{} lines but {} labels",
                lines.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|l| l.is_empty()) {
            return Err(EvalError::InvalidInput(format!("line {i} has an empty label")));
        }
        Ok(Self { lines, labels })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Number of distinct ground-truth labels.
    pub fn template_count(&self) -> usize {
        self.labels.iter().collect::<std::collections::HashSet<_>>().len()
    }

    /// Uniform sample of `n` lines without replacement, in corpus order.
    /// Returns a copy of the whole corpus when `n >= len`.
    pub fn sample(&self, n: usize, seed: u64) -> Self {
        if n >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, self.len(), n).into_vec();
        picked.sort_unstable();
        Self {
            lines: picked.iter().map(|&i| self.lines[i].clone()).collect(),
            labels: picked.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// First `n` lines.
    pub fn prefix(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            lines: self.lines[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

/// Load a structured LogHub file. `Content` is the message; the label is
/// `EventTemplate`, or `EventId` when there is no template column.
pub fn load_loghub(path: impl AsRef<Path>) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_loghub(file, &path.display().to_string())
}

/// Parse structured CSV from any reader; `name` is used in error messages.
pub fn parse_loghub(reader: impl Read, name: &str) -> Result<LabeledCorpus> {
    let format = |message: String| EvalError::Format {
        path: name.to_owned(),
        message,
    };
    let mut csv = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = csv.headers().map_err(|e| format(e.to_string()))?.clone();
    if headers.is_empty() {
        return Err(format("empty file".into()));
    }
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let content = column("Content").ok_or_else(|| EvalError::MissingColumn {
        path: name.to_owned(),
        column: "Content".into(),
    })?;
    let label = column("EventTemplate")
        .or_else(|| column("EventId"))
        .ok_or_else(|| EvalError::MissingColumn {
            path: name.to_owned(),
            column: "EventTemplate".into(),
        })?;

    let mut lines = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record.map_err(|e| format(format!("row {}: {e}", row + 2)))?;
        let text = record.get(content).unwrap_or_default();
        let id = record.get(label).unwrap_or_default();
        if id.is_empty() {
            return Err(format(format!("row {}: empty label", row + 2)));
        }
        lines.push(text.to_owned());
        labels.push(id.to_owned());
    }
    if lines.is_empty() {
        return Err(format("no records".into()));
    }
    Ok(LabeledCorpus { lines, labels })
}
