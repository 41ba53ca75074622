//! Ingestion and query service: per-topic configuration, volume and time
//! training triggers, atomic model swaps and an HTTP API.

mod api;
mod config;
mod error;
mod service;
mod topic;

pub use api::{router, serve};
pub use config::{parse_topic_config, valid_topic_name, ServiceConfig, TopicEntry};
pub use error::{Result, ServiceError};
pub use service::{unix_now, Service};
pub use topic::{ChainNode, IngestResult, Topic, TopicState, TrainOutcome};
