//! Domain types shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{encode_token, WILDCARD, WILDCARD_HASH};

/// Identifier of a node inside one [`ParseModel`](crate::model::ParseModel).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A tokenized log line. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if tokens.iter().any(String::is_empty) {
            return Err(Error::InvalidInput("tokens must be non-empty".into()));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

/// A log reduced to token hashes, with the token texts kept for template
/// rendering and a multiplicity count for deduplicated input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedLog {
    pub hashes: Vec<u64>,
    pub tokens: Vec<String>,
    pub count: u64,
}

impl EncodedLog {
    /// Encode a token sequence with multiplicity 1.
    pub fn encode(tokens: &TokenSequence) -> Self {
        Self::from_tokens(tokens.tokens().iter().map(String::as_str))
    }

    pub(crate) fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(str::to_owned).collect();
        let hashes = tokens.iter().map(|t| encode_token(t)).collect();
        Self {
            hashes,
            tokens,
            count: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn with_count(mut self, count: u64) -> Self {
        self.count = count;
        self
    }
}

/// One position of a [`Template`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Literal { text: String, hash: u64 },
    /// Matches exactly one token.
    Wildcard,
}

impl Cell {
    /// Build a literal cell; `"*"` becomes a wildcard.
    pub fn literal(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidInput("literal cell cannot be empty".into()));
        }
        if text == WILDCARD {
            return Ok(Cell::Wildcard);
        }
        let hash = encode_token(&text);
        Ok(Cell::Literal { text, hash })
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self, Cell::Wildcard)
    }

    pub fn hash(&self) -> u64 {
        match self {
            Cell::Literal { hash, .. } => *hash,
            Cell::Wildcard => WILDCARD_HASH,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Cell::Literal { text, .. } => text,
            Cell::Wildcard => WILDCARD,
        }
    }

    /// True when both cells accept a common token: equal literals, or either
    /// side a wildcard.
    pub fn compatible(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Wildcard, _) | (_, Cell::Wildcard) => true,
            (Cell::Literal { hash: a, .. }, Cell::Literal { hash: b, .. }) => a == b,
        }
    }
}

/// A sequence of literal and wildcard cells, one per token position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Template {
    pub cells: Vec<Cell>,
}

impl Template {
    pub fn new(cells: Vec<Cell>) -> Self {
        Self { cells }
    }

    /// Parse a whitespace-separated template such as `"release lock *"`.
    pub fn parse(text: &str) -> Result<Self> {
        let cells = text
            .split_whitespace()
            .map(Cell::literal)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cells })
    }

    /// The template that matches exactly this log.
    pub fn verbatim(log: &EncodedLog) -> Self {
        let cells = log
            .hashes
            .iter()
            .zip(&log.tokens)
            .map(|(&hash, text)| {
                if hash == WILDCARD_HASH {
                    Cell::Wildcard
                } else {
                    Cell::Literal {
                        text: text.clone(),
                        hash,
                    }
                }
            })
            .collect();
        Self { cells }
    }

    pub fn all_wildcards(len: usize) -> Self {
        Self {
            cells: vec![Cell::Wildcard; len],
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn wildcard_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_wildcard()).count()
    }

    /// Positionwise match: every literal equals the log's hash at that
    /// position; wildcards accept anything. Lengths must agree.
    #[inline]
    pub fn matches(&self, hashes: &[u64]) -> bool {
        self.cells.len() == hashes.len()
            && self.cells.iter().zip(hashes).all(|(cell, &h)| match cell {
                Cell::Wildcard => true,
                Cell::Literal { hash, .. } => *hash == h,
            })
    }

    /// Space-joined cell texts, without collapsing wildcards.
    pub fn raw_text(&self) -> String {
        let texts: Vec<&str> = self.cells.iter().map(Cell::text).collect();
        texts.join(" ")
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw_text())
    }
}

/// Initial-grouping key: token count plus the hashes of the first `k` tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub length: usize,
    pub prefix: Vec<u64>,
}

impl GroupKey {
    pub fn of(hashes: &[u64], k: usize) -> Self {
        let take = k.min(hashes.len());
        Self {
            length: hashes.len(),
            prefix: hashes[..take].to_vec(),
        }
    }

    pub fn is_consistent(&self, k: usize) -> bool {
        self.prefix.len() == k.min(self.length)
    }
}

/// One node of a precision tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub template: Template,
    pub saturation: f64,
    pub log_count: u64,
    pub group_key: GroupKey,
    /// Inserted online for an unmatched log; replaced at the next training.
    pub temporary: bool,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}
