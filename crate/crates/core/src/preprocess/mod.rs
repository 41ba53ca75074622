//! Raw line to [`EncodedLog`]: variable replacement, tokenization, hash
//! encoding and deduplication.

use std::borrow::Cow;
use std::collections::HashMap;

use nohash_hasher::BuildNoHashHasher;
use regex::{NoExpand, Regex};

use crate::config::{TopicConfig, VariablePattern};
use crate::error::{Error, Result};
use crate::hash::{encode_token, WILDCARD};
use crate::types::{EncodedLog, TokenSequence};

mod tokenizer;

pub use tokenizer::{default_regex, Tokenizer};

/// A validated variable rule.
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    regex: Regex,
    label: String,
}

impl CompiledPattern {
    pub fn compile(pattern: &VariablePattern) -> Result<Self> {
        let regex = tokenizer::compile_linear(&pattern.pattern)?;
        if regex.is_match("") {
            return Err(Error::Config(format!(
                "variable pattern {:?} ({}) matches the empty string",
                pattern.pattern, pattern.label
            )));
        }
        Ok(Self {
            regex,
            label: pattern.label.clone(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Replace every match of each pattern, in list order, with `*`.
pub fn replace_variables<'a>(raw: &'a str, patterns: &[CompiledPattern]) -> Cow<'a, str> {
    let mut line = Cow::Borrowed(raw);
    for p in patterns {
        if let Cow::Owned(replaced) = p.regex.replace_all(&line, NoExpand(WILDCARD)) {
            line = Cow::Owned(replaced);
        }
    }
    line
}

/// Split `line` with the given tokenizer.
pub fn tokenize(line: &str, tokenizer: &Tokenizer) -> Result<TokenSequence> {
    tokenizer.tokenize(line)
}

/// Hash-encode a token sequence with multiplicity 1.
pub fn encode(tokens: &TokenSequence) -> EncodedLog {
    EncodedLog::encode(tokens)
}

/// Collapse logs with identical hash vectors, summing counts. Output order is
/// first occurrence.
pub fn deduplicate(batch: impl IntoIterator<Item = EncodedLog>) -> Vec<EncodedLog> {
    let mut dedup = Deduplicator::default();
    for log in batch {
        dedup.push(log);
    }
    dedup.into_logs()
}

/// Probability of at least one collision among `n` distinct tokens under a
/// uniform 64-bit hash (birthday approximation `1 - exp(-n(n-1)/2^65)`).
pub fn collision_probability(n: u64) -> f64 {
    let n = n as f64;
    let exponent = n * (n - 1.0) / 2f64.powi(65);
    -(-exponent).exp_m1()
}

/// The per-topic preprocessing pipeline.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    tokenizer: Tokenizer,
    variables: Vec<CompiledPattern>,
}

impl Preprocessor {
    pub fn new(config: &TopicConfig) -> Result<Self> {
        let tokenizer = Tokenizer::new(&config.tokenizer_pattern)?;
        let variables = config
            .variable_patterns
            .iter()
            .map(CompiledPattern::compile)
            .collect::<Result<_>>()?;
        Ok(Self {
            tokenizer,
            variables,
        })
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn replace_variables<'a>(&self, raw: &'a str) -> Cow<'a, str> {
        replace_variables(raw, &self.variables)
    }

    /// Full pipeline for one line. Fails with [`Error::EmptySequence`] when
    /// nothing but delimiters remains.
    pub fn encode_line(&self, raw: &str) -> Result<EncodedLog> {
        let line = self.replace_variables(raw);
        let tokens = self.tokenizer.tokenize(&line)?;
        Ok(EncodedLog::encode(&tokens))
    }

    /// Run the pipeline and hand the token slices and hashes to `f` without
    /// allocating owned tokens. Returns `None` for empty lines.
    pub fn with_encoded<R>(
        &self,
        raw: &str,
        scratch: &mut Scratch,
        f: impl FnOnce(&[&str], &[u64]) -> R,
    ) -> Option<R> {
        let line = self.replace_variables(raw);
        let mut parts: Vec<&str> = Vec::with_capacity(32);
        self.tokenizer.split_into(&line, &mut parts);
        if parts.is_empty() {
            return None;
        }
        scratch.hashes.clear();
        scratch.hashes.extend(parts.iter().map(|t| encode_token(t)));
        Some(f(&parts, &scratch.hashes))
    }
}

/// Reusable buffers for [`Preprocessor::with_encoded`].
#[derive(Debug, Default)]
pub struct Scratch {
    hashes: Vec<u64>,
}

#[inline]
pub(crate) fn vector_key(hashes: &[u64]) -> u64 {
    let mut h = hashes.len() as u64;
    for &x in hashes {
        h = (h.rotate_left(5) ^ x).wrapping_mul(0x517c_c1b7_2722_0a95);
    }
    h
}

/// Incremental deduplication of encoded logs, preserving first-seen order.
#[derive(Debug, Default)]
pub struct Deduplicator {
    index: HashMap<u64, usize, BuildNoHashHasher<u64>>,
    // Distinct vectors whose bucketing keys collide.
    overflow: Vec<(u64, usize)>,
    logs: Vec<EncodedLog>,
    skipped: u64,
}

impl Deduplicator {
    pub fn new() -> Self {
        Self::default()
    }

    fn find(&self, key: u64, hashes: &[u64]) -> Option<usize> {
        let first = *self.index.get(&key)?;
        if self.logs[first].hashes == hashes {
            return Some(first);
        }
        self.overflow
            .iter()
            .find(|(k, i)| *k == key && self.logs[*i].hashes == hashes)
            .map(|&(_, i)| i)
    }

    fn insert_new(&mut self, key: u64, log: EncodedLog) -> usize {
        let idx = self.logs.len();
        self.logs.push(log);
        if self.index.contains_key(&key) {
            self.overflow.push((key, idx));
        } else {
            self.index.insert(key, idx);
        }
        idx
    }

    /// Add one log; returns the index of its unique entry.
    pub fn push(&mut self, log: EncodedLog) -> usize {
        let key = vector_key(&log.hashes);
        match self.find(key, &log.hashes) {
            Some(i) => {
                self.logs[i].count += log.count;
                i
            }
            None => self.insert_new(key, log),
        }
    }

    /// Add `count` occurrences of an already-tokenized line, copying token
    /// texts only when the vector is new.
    pub fn push_parts(&mut self, tokens: &[&str], hashes: &[u64], count: u64) -> usize {
        let key = vector_key(hashes);
        match self.find(key, hashes) {
            Some(i) => {
                self.logs[i].count += count;
                i
            }
            None => self.insert_new(
                key,
                EncodedLog {
                    hashes: hashes.to_vec(),
                    tokens: tokens.iter().map(|t| (*t).to_owned()).collect(),
                    count,
                },
            ),
        }
    }

    /// Preprocess and add a raw line. Empty lines are counted and skipped.
    pub fn push_line(
        &mut self,
        pre: &Preprocessor,
        scratch: &mut Scratch,
        raw: &str,
    ) -> Option<usize> {
        let idx = pre.with_encoded(raw, scratch, |tokens, hashes| {
            self.push_parts(tokens, hashes, 1)
        });
        if idx.is_none() {
            self.skipped += 1;
        }
        idx
    }

    /// Merge another partition's result; entries new to `self` keep the
    /// other's relative order after all existing entries. Returns the index in
    /// `self` of each of `other`'s entries.
    pub fn absorb(&mut self, other: Deduplicator) -> Vec<usize> {
        self.skipped += other.skipped;
        other.logs.into_iter().map(|log| self.push(log)).collect()
    }

    pub fn logs(&self) -> &[EncodedLog] {
        &self.logs
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }

    /// Lines skipped because they had no tokens.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn total_count(&self) -> u64 {
        self.logs.iter().map(|l| l.count).sum()
    }

    pub fn into_logs(self) -> Vec<EncodedLog> {
        self.logs
    }
}
