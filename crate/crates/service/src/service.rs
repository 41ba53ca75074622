//! The topic registry and model persistence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;
use strata_core::model::{deserialize, serialize};
use strata_core::{NodeId, TemplateRow, TopicConfig};

use crate::config::{valid_topic_name, ServiceConfig};
use crate::error::{Result, ServiceError};
use crate::topic::{ChainNode, IngestResult, Topic, TopicState, TrainOutcome};

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Default)]
pub struct Service {
    topics: RwLock<BTreeMap<String, Arc<Topic>>>,
    data_dir: Option<PathBuf>,
}

impl Service {
    /// A service that keeps models in memory only.
    pub fn new() -> Self {
        Self::default()
    }

    /// A service that writes each trained model to `<dir>/<topic>.model`.
    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { topics: RwLock::default(), data_dir: Some(dir) })
    }

    /// Create the configured topics, reloading stored models whose
    /// tokenization still matches.
    pub fn from_config(config: &ServiceConfig) -> Result<Self> {
        let service = match &config.data_dir {
            Some(dir) => Self::with_data_dir(dir)?,
            None => Self::new(),
        };
        for (name, topic_config) in config.topic_configs()? {
            service.put_topic(&name, topic_config)?;
        }
        Ok(service)
    }

    fn model_path(&self, topic: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{topic}.model")))
    }

    pub fn topic(&self, name: &str) -> Result<Arc<Topic>> {
        self.topics.read().get(name).cloned().ok_or_else(|| ServiceError::TopicNotFound(name.to_owned()))
    }

    pub fn topic_names(&self) -> Vec<String> {
        self.topics.read().keys().cloned().collect()
    }

    /// Create or reconfigure a topic. Returns true when the topic is new.
    pub fn put_topic(&self, name: &str, config: TopicConfig) -> Result<bool> {
        if !valid_topic_name(name) {
            return Err(ServiceError::InvalidInput(format!("invalid topic name {name:?}")));
        }
        config.validate()?;
        if let Ok(topic) = self.topic(name) {
            if topic.write(|s| s.reconfigure(config))? {
                tracing::info!(topic = name, "tokenization changed; model and buffer discarded");
            }
            return Ok(false);
        }
        let now = unix_now();
        let state = match self.model_path(name).filter(|p| p.exists()) {
            Some(path) => {
                let model = deserialize(&std::fs::read(&path)?)?;
                match TopicState::with_model(config.clone(), model, now) {
                    Ok(s) => s,
                    Err(e) => {
                        tracing::warn!(topic = name, error = %e, "ignoring stored model");
                        TopicState::new(name, config, now)?
                    }
                }
            }
            None => TopicState::new(name, config, now)?,
        };
        let mut topics = self.topics.write();
        if topics.contains_key(name) {
            return Ok(false);
        }
        topics.insert(name.to_owned(), Arc::new(Topic::new(name, state)));
        Ok(true)
    }

    pub fn ingest<S: AsRef<str>>(&self, topic: &str, lines: &[S]) -> Result<Vec<IngestResult>> {
        self.topic(topic)?.write(|s| s.ingest(lines))
    }

    /// Train now and persist the new model.
    pub fn train(&self, topic: &str, now: u64) -> Result<TrainOutcome> {
        let t = self.topic(topic)?;
        let outcome = t.train(now)?;
        if let Some(path) = self.model_path(topic) {
            let bytes = t.read(|s| serialize(s.model()));
            write_atomic(&path, &bytes)?;
        }
        tracing::info!(topic, version = outcome.version, logs = outcome.trained_logs, "trained");
        Ok(outcome)
    }

    pub fn query(&self, topic: &str, threshold: f64) -> Result<Vec<TemplateRow>> {
        self.topic(topic)?.read(|s| s.query(threshold))
    }

    pub fn ancestors(&self, topic: &str, node: NodeId) -> Result<Vec<ChainNode>> {
        self.topic(topic)?.read(|s| s.ancestors(node))
    }

    /// The live model in the model file format.
    pub fn model_bytes(&self, topic: &str) -> Result<Vec<u8>> {
        Ok(self.topic(topic)?.read(|s| serialize(s.model())))
    }

    /// Topics whose volume or time trigger fired and that are not training.
    pub fn due_for_training(&self, now: u64) -> Vec<String> {
        self.topics
            .read()
            .values()
            .filter(|t| !t.is_training() && t.read(|s| s.should_train(now)))
            .map(|t| t.name.clone())
            .collect()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("model.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
