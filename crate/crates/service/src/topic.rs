//! Per-topic state: the live model, the training buffer and the triggers.

use std::collections::HashMap;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use strata_core::model::rows_at_threshold;
use strata_core::preprocess::{Deduplicator, Preprocessor};
use strata_core::train::{train_logs, TrainOptions, TrainStats};
use strata_core::{
    display_template, match_or_insert, merge_models, rebuild_index, EncodedLog, MatchIndex, NodeId, ParseModel,
    TemplateRow, TopicConfig,
};

use crate::error::{Result, ServiceError};

/// Outcome for one ingested line. Lines without tokens get no node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResult {
    pub node_id: Option<NodeId>,
    pub saturation: Option<f64>,
    pub matched: bool,
}

/// One step of a saturation chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainNode {
    pub node_id: NodeId,
    pub display_text: String,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub version: u64,
    pub trained_logs: u64,
    pub unique_logs: usize,
    pub sampled_logs: usize,
}

/// Everything guarded by the topic lock.
#[derive(Debug)]
pub struct TopicState {
    pub config: TopicConfig,
    pre: Preprocessor,
    model: ParseModel,
    index: MatchIndex,
    buffer: Deduplicator,
    /// Lines in `buffer`, duplicates included.
    pub buffered: u64,
    /// Logs matched to a non-temporary node since the last swap. Temporary
    /// leaves carry their own counts in the model.
    matched: HashMap<NodeId, u64>,
    /// Unix seconds of the last successful training, or of creation.
    pub last_trained_at: u64,
    pub trained_once: bool,
}

impl TopicState {
    pub fn new(name: &str, config: TopicConfig, now: u64) -> Result<Self> {
        config.validate()?;
        let model = ParseModel::empty(name, &config);
        Self::with_model(config, model, now)
    }

    /// Start from a stored model. Its fingerprint must match `config`.
    pub fn with_model(config: TopicConfig, model: ParseModel, now: u64) -> Result<Self> {
        config.validate()?;
        if model.config_fingerprint != config.fingerprint() {
            return Err(ServiceError::InvalidInput(
                "stored model was built with a different tokenizer or variable patterns".into(),
            ));
        }
        model.validate()?;
        let pre = Preprocessor::new(&config)?;
        let index = rebuild_index(&model, config.prefix_k);
        let trained_once = !model.nodes.is_empty();
        Ok(Self {
            pre,
            index,
            trained_once,
            model,
            buffer: Deduplicator::new(),
            buffered: 0,
            matched: HashMap::new(),
            last_trained_at: now,
            config,
        })
    }

    pub fn model(&self) -> &ParseModel {
        &self.model
    }

    /// Match every line against the live model, inserting temporary leaves
    /// for misses, and buffer the lines for the next training.
    pub fn ingest<S: AsRef<str>>(&mut self, lines: &[S]) -> Result<Vec<IngestResult>> {
        let mut out = Vec::with_capacity(lines.len());
        for line in lines {
            let log = match self.pre.encode_line(line.as_ref()) {
                Ok(log) => log,
                Err(strata_core::Error::EmptySequence) => {
                    out.push(IngestResult { node_id: None, saturation: None, matched: false });
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let r = self.match_one(&log)?;
            self.buffer.push(log);
            self.buffered += 1;
            out.push(IngestResult { node_id: Some(r.node_id), saturation: Some(r.saturation), matched: r.matched });
        }
        Ok(out)
    }

    fn match_one(&mut self, log: &EncodedLog) -> Result<strata_core::MatchResult> {
        let r = match_or_insert(log, &mut self.model, &mut self.index)?;
        if r.matched {
            *self.matched.entry(r.node_id).or_default() += log.count;
        }
        Ok(r)
    }

    /// True when the buffer reached the volume threshold (the initial volume
    /// before the first training), or when the interval has elapsed and
    /// there is something to train.
    pub fn should_train(&self, now: u64) -> bool {
        let volume = if self.trained_once {
            self.config.training_volume_threshold
        } else {
            self.config.initial_training_volume
        };
        self.buffered >= volume
            || (self.buffered > 0 && now.saturating_sub(self.last_trained_at) >= self.config.training_interval_secs)
    }

    /// Templates at `threshold`, counting every log seen by the live model.
    pub fn query(&self, threshold: f64) -> Result<Vec<TemplateRow>> {
        let counts = self
            .model
            .leaves()
            .map(|n| (n.id, n.log_count + self.matched.get(&n.id).copied().unwrap_or(0)));
        Ok(rows_at_threshold(&self.model, threshold, counts)?)
    }

    /// Ancestors of `id` from its parent up to the root.
    pub fn ancestors(&self, id: NodeId) -> Result<Vec<ChainNode>> {
        let chain = self.model.ancestors(id)?;
        chain[1..]
            .iter()
            .map(|&a| {
                let n = self.model.node(a)?;
                Ok(ChainNode { node_id: a, display_text: display_template(&n.template), saturation: n.saturation })
            })
            .collect()
    }

    /// Replace the configuration. A change to tokenization discards the
    /// model and buffer, since their hashes no longer apply.
    pub fn reconfigure(&mut self, config: TopicConfig) -> Result<bool> {
        config.validate()?;
        let reset = config.fingerprint() != self.config.fingerprint();
        self.pre = Preprocessor::new(&config)?;
        if reset {
            let version = self.model.version;
            self.model = ParseModel::empty(self.model.topic.clone(), &config);
            self.model.version = version;
            self.buffer = Deduplicator::new();
            self.buffered = 0;
            self.matched.clear();
            self.trained_once = false;
        }
        self.index = rebuild_index(&self.model, config.prefix_k);
        self.config = config;
        Ok(reset)
    }
}

/// A topic: state behind a lock, plus a second lock that serializes training.
#[derive(Debug)]
pub struct Topic {
    pub name: String,
    state: RwLock<TopicState>,
    training: Mutex<()>,
}

impl Topic {
    pub fn new(name: impl Into<String>, state: TopicState) -> Self {
        Self { name: name.into(), state: RwLock::new(state), training: Mutex::new(()) }
    }

    pub fn read<R>(&self, f: impl FnOnce(&TopicState) -> R) -> R {
        f(&self.state.read())
    }

    pub fn write<R>(&self, f: impl FnOnce(&mut TopicState) -> R) -> R {
        f(&mut self.state.write())
    }

    pub fn is_training(&self) -> bool {
        self.training.is_locked()
    }

    /// Train on the buffer and swap in the merged model.
    ///
    /// The buffer is taken under the lock, training runs without it, and the
    /// swap happens under it again. Lines ingested meanwhile were matched
    /// against the old model; they are replayed against the new one and stay
    /// buffered for the next run. On error the old model is kept and the
    /// taken lines return to the buffer.
    pub fn train(&self, now: u64) -> Result<TrainOutcome> {
        let _guard = self.training.lock();
        let (logs, buffered, previous, config) = {
            let mut s = self.state.write();
            if s.buffered == 0 {
                return Err(ServiceError::Conflict("no buffered logs to train on".into()));
            }
            let logs = std::mem::take(&mut s.buffer).into_logs();
            let buffered = std::mem::take(&mut s.buffered);
            (logs, buffered, s.model.without_temporary(), s.config.clone())
        };

        let options = TrainOptions { trained_at: now, ..TrainOptions::default() };
        let result = train_logs(&self.name, &config, logs.clone(), options).and_then(|(mut fresh, _, stats)| {
            if previous.nodes.is_empty() {
                fresh.version = previous.version + 1;
                Ok((fresh, stats))
            } else {
                Ok((merge_models(&previous, &fresh, config.merge_similarity_threshold)?, stats))
            }
        });

        let mut s = self.state.write();
        let (merged, stats): (ParseModel, TrainStats) = match result {
            Ok(r) if s.config.fingerprint() == config.fingerprint() => r,
            Ok(_) => return Err(ServiceError::Conflict("topic was reconfigured during training".into())),
            Err(e) => {
                let later = std::mem::take(&mut s.buffer);
                for log in logs {
                    s.buffer.push(log);
                }
                s.buffer.absorb(later);
                s.buffered += buffered;
                return Err(e.into());
            }
        };
        s.index = rebuild_index(&merged, s.config.prefix_k);
        s.model = merged;
        s.matched.clear();
        let pending: Vec<EncodedLog> = s.buffer.logs().to_vec();
        for log in &pending {
            s.match_one(log)?;
        }
        s.last_trained_at = now;
        s.trained_once = true;
        Ok(TrainOutcome {
            version: s.model.version,
            trained_logs: buffered,
            unique_logs: stats.unique,
            sampled_logs: stats.sampled,
        })
    }
}
