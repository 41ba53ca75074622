//! Per-topic configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::digest;

/// Default delimiter rule: `://`, whitespace and common punctuation, a period
/// followed by whitespace or end of line, and escaped quotes.
pub const DEFAULT_TOKENIZER_PATTERN: &str =
    r#"(?:://)|(?:(?:[\s\'\";=()\[\]{}?@&<>:\n\t\r,])|(?:[\.](\s+|$))|(?:\\[\"\']))+"#;

/// A variable rule: every match is replaced by `*` before tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariablePattern {
    pub pattern: String,
    pub label: String,
}

impl VariablePattern {
    pub fn new(pattern: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            label: label.into(),
        }
    }
}

/// Shipped variable rules, applied in this order.
///
/// | label       | matches                                            |
/// |-------------|----------------------------------------------------|
/// | `timestamp` | ISO-8601 date-times (`2024-05-01T12:00:00.123Z`)    |
/// | `syslog_ts` | syslog stamps (`Jun 14 15:16:01`)                   |
/// | `uuid`      | canonical 8-4-4-4-12 hex UUIDs                      |
/// | `ipv4`      | dotted quads with an optional `:port`               |
/// | `md5`       | 32 hex digits                                       |
/// | `hex`       | `0x`-prefixed hex numbers                           |
pub fn default_variable_patterns() -> Vec<VariablePattern> {
    vec![
        VariablePattern::new(
            r"\b\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:Z|[+-]\d{2}:?\d{2})?\b",
            "timestamp",
        ),
        VariablePattern::new(
            r"\b(?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec)\s+\d{1,2}\s+\d{2}:\d{2}:\d{2}\b",
            "syslog_ts",
        ),
        VariablePattern::new(
            r"\b[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}\b",
            "uuid",
        ),
        VariablePattern::new(r"\b(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?\b", "ipv4"),
        VariablePattern::new(r"\b[0-9a-fA-F]{32}\b", "md5"),
        VariablePattern::new(r"\b0[xX][0-9a-fA-F]+\b", "hex"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub tokenizer_pattern: String,
    pub variable_patterns: Vec<VariablePattern>,
    /// Number of leading tokens that take part in initial grouping.
    pub prefix_k: usize,
    /// Buffered log count that triggers a training run.
    pub training_volume_threshold: u64,
    /// Buffered log count that triggers the first training of a topic.
    pub initial_training_volume: u64,
    /// Seconds after the last training at which buffered logs are trained
    /// regardless of volume.
    pub training_interval_secs: u64,
    /// Maximum unique logs used for one training run.
    pub sample_cap: usize,
    pub merge_similarity_threshold: f64,
    pub rng_seed: u64,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            tokenizer_pattern: DEFAULT_TOKENIZER_PATTERN.to_owned(),
            variable_patterns: default_variable_patterns(),
            prefix_k: 0,
            training_volume_threshold: 100_000,
            initial_training_volume: 10_000,
            training_interval_secs: 15 * 60,
            sample_cap: 1_000_000,
            merge_similarity_threshold: 0.9,
            rng_seed: 0x5eed,
        }
    }
}

impl TopicConfig {
    /// Check numeric ranges and compile every pattern once. Pattern errors
    /// surface here rather than during ingestion.
    pub fn validate(&self) -> Result<()> {
        if self.training_volume_threshold == 0 {
            return Err(Error::Config("training_volume_threshold must be positive".into()));
        }
        if self.initial_training_volume == 0 {
            return Err(Error::Config("initial_training_volume must be positive".into()));
        }
        if self.training_interval_secs == 0 {
            return Err(Error::Config("training_interval_secs must be positive".into()));
        }
        if self.sample_cap == 0 {
            return Err(Error::Config("sample_cap must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.merge_similarity_threshold) {
            return Err(Error::Config(format!(
                "merge_similarity_threshold {} is outside [0, 1]",
                self.merge_similarity_threshold
            )));
        }
        crate::preprocess::Preprocessor::new(self).map(|_| ())
    }

    /// Digest of the settings that change how a line is encoded. Two models
    /// can only be merged or share an index when their fingerprints agree.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Encoding<'a> {
            tokenizer_pattern: &'a str,
            variable_patterns: &'a [VariablePattern],
            prefix_k: usize,
        }
        let canonical = serde_json::to_vec(&Encoding {
            tokenizer_pattern: &self.tokenizer_pattern,
            variable_patterns: &self.variable_patterns,
            prefix_k: self.prefix_k,
        })
        .expect("config serializes");
        format!("{:016x}", digest(&canonical))
    }
}
