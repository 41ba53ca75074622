//! Recursive construction of one group's cluster tree.

use std::collections::VecDeque;

use rand::Rng;

use super::split::{cluster_once, early_stop};
use super::stats::{saturation, template_of, ClusterStats};
use crate::error::{Error, Result};
use crate::preprocess::Deduplicator;
use crate::types::{EncodedLog, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Seeds one pass may open before a node with more logs than this is
    /// left unsplit.
    pub max_clusters: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_clusters: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub template: Template,
    pub saturation: f64,
    pub log_count: u64,
}

/// A group's tree in breadth-first order; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Subtree {
    pub nodes: Vec<SubtreeNode>,
    /// Leaf node of each input log, by input position.
    pub leaf_of: Vec<usize>,
    /// Nodes finalized by the depth cap.
    pub forced_leaves: usize,
    /// Leaves below saturation 1 that no pass could split.
    pub unsplit: usize,
}

impl Subtree {
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                depth[i] = depth[p] + 1;
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

/// Build the cluster tree of one group. Input may contain duplicates; they
/// are collapsed first, so the result only depends on the multiset of logs.
pub fn build_tree<R: Rng + ?Sized>(
    group: &[EncodedLog],
    params: TreeParams,
    rng: &mut R,
) -> Result<Subtree> {
    let first = group
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot build a tree from an empty group".into()))?;
    let m = first.len();
    if group.iter().any(|l| l.len() != m) {
        return Err(Error::Invariant("group mixes token lengths".into()));
    }

    let mut dedup = Deduplicator::new();
    let input_to_unique: Vec<usize> = group.iter().map(|l| dedup.push(l.clone())).collect();
    let logs = dedup.into_logs();
    let depth_cap = 2 * m.max(1);

    let mut nodes: Vec<SubtreeNode> = Vec::new();
    let mut unique_leaf = vec![usize::MAX; logs.len()];
    let mut forced_leaves = 0;
    let mut unsplit = 0;
    let mut queue: VecDeque<(Vec<usize>, Option<usize>, usize)> = VecDeque::new();
    queue.push_back(((0..logs.len()).collect(), None, 0));

    while let Some((members, parent, depth)) = queue.pop_front() {
        let stats = ClusterStats::from_members(&logs, &members)?;
        let sat = saturation(&stats);
        let id = nodes.len();
        nodes.push(SubtreeNode {
            parent,
            children: Vec::new(),
            template: template_of(&stats, &logs),
            saturation: sat,
            log_count: stats.size(),
        });
        if let Some(p) = parent {
            nodes[p].children.push(id);
            if sat <= nodes[p].saturation {
                return Err(Error::Invariant(format!(
                    "child saturation {sat} does not exceed parent {}",
                    nodes[p].saturation
                )));
            }
        }

        let terminal = sat >= 1.0 || members.len() == 1;
        if !terminal && depth >= depth_cap {
            tracing::warn!(depth, logs = members.len(), saturation = sat, "depth cap reached, finalizing node");
            forced_leaves += 1;
        }
        if terminal || depth >= depth_cap {
            for &u in &members {
                unique_leaf[u] = id;
            }
            continue;
        }
        let parts = match early_stop(&stats, &logs, &members) {
            Some(parts) => parts,
            None => match cluster_once(&logs, &members, &stats, params.max_clusters, rng) {
                Some(parts) => parts,
                None => {
                    unsplit += 1;
                    for &u in &members {
                        unique_leaf[u] = id;
                    }
                    continue;
                }
            },
        };
        for part in parts {
            queue.push_back((part, Some(id), depth + 1));
        }
    }

    Ok(Subtree {
        nodes,
        leaf_of: input_to_unique.into_iter().map(|u| unique_leaf[u]).collect(),
        forced_leaves,
        unsplit,
    })
}
