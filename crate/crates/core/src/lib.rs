//! Log template extraction with hierarchical, saturation-scored clustering.

pub mod clustering;
pub mod config;
pub mod error;
pub mod grouping;
pub mod hash;
pub mod matcher;
pub mod model;
pub mod preprocess;
pub mod train;
pub mod types;

pub use config::{TopicConfig, VariablePattern};
pub use error::{Error, Result};
pub use matcher::{match_log, match_or_insert, rebuild_index, IndexTier, MatchIndex, MatchResult};
pub use model::{display_template, merge_models, rows_at_threshold, template_similarity, ParseModel, TemplateRow};
pub use train::{train_lines, train_logs, TrainOptions, Trained};
pub use types::{Cell, ClusterNode, EncodedLog, GroupKey, NodeId, Template, TokenSequence};
