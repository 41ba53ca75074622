//! Hierarchical clustering of a group into a saturation-ordered tree.

mod split;
mod stats;
mod tree;

pub use split::{cluster_once, early_stop, early_stop_rule, EarlyStop, ITERATION_CAP};
pub use stats::{positional_similarity, saturation, template_of, ClusterStats, PositionClass, Weights};
pub use tree::{build_tree, Subtree, SubtreeNode, TreeParams};
