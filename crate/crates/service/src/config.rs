//! Server settings, read from TOML.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use strata_core::TopicConfig;

use crate::error::{Result, ServiceError};

/// ```toml
/// listen = "127.0.0.1:7070"
/// data_dir = "/var/lib/strata"     # optional; models persist here
/// trigger_check_secs = 5
///
/// [topics.android]                 # inline topic settings
/// training_volume_threshold = 50000
///
/// [topics.web]
/// config_file = "web.toml"         # or a separate file, relative to this one
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: Option<PathBuf>,
    /// How often the time-based training trigger is evaluated.
    pub trigger_check_secs: u64,
    pub topics: BTreeMap<String, TopicEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopicEntry {
    File {
        config_file: PathBuf,
    },
    Inline(TopicConfig),
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 7070)),
            data_dir: None,
            trigger_check_secs: 5,
            topics: BTreeMap::new(),
        }
    }
}

/// Parse and validate a topic configuration written in TOML.
pub fn parse_topic_config(text: &str) -> Result<TopicConfig> {
    let config: TopicConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        if config.trigger_check_secs == 0 {
            return Err(ServiceError::Config("trigger_check_secs must be positive".into()));
        }
        if let Some(name) = config.topics.keys().find(|n| !valid_topic_name(n)) {
            return Err(ServiceError::Config(format!("invalid topic name {name:?}")));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in config.topics.values_mut() {
            if let TopicEntry::File { config_file } = entry {
                *config_file = base.join(&*config_file);
            }
        }
        Ok(config)
    }

    /// Resolve every topic to a validated configuration.
    pub fn topic_configs(&self) -> Result<BTreeMap<String, TopicConfig>> {
        self.topics
            .iter()
            .map(|(name, entry)| {
                let config = match entry {
                    TopicEntry::Inline(c) => {
                        c.validate()?;
                        c.clone()
                    }
                    TopicEntry::File { config_file } => {
                        let text = std::fs::read_to_string(config_file)
                            .map_err(|e| ServiceError::Config(format!("{}: {e}", config_file.display())))?;
                        parse_topic_config(&text)
                            .map_err(|e| ServiceError::Config(format!("{}: {e}", config_file.display())))?
                    }
                };
                Ok((name.clone(), config))
            })
            .collect()
    }
}

/// Topic names double as file names in the data directory.
pub fn valid_topic_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
        && !name.starts_with('.')
}
