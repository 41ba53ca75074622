//! Online matching against template text, most saturated template first.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use nohash_hasher::BuildNoHashHasher;

use crate::error::{Error, Result};
use crate::model::{intersect, ParseModel};
use crate::preprocess::vector_key;
use crate::types::{ClusterNode, EncodedLog, GroupKey, NodeId, Template};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub node_id: NodeId,
    pub saturation: f64,
    /// False when the call created a temporary node for the log.
    pub matched: bool,
}

/// Which nodes are candidates for matching.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum IndexTier {
    /// The most precise nodes: every leaf.
    #[default]
    Leaves,
    /// For each leaf, its coarsest ancestor-or-self at this saturation.
    Threshold(f64),
}

#[derive(Debug, Clone)]
struct Entry {
    node: NodeId,
    saturation: f64,
    wildcards: usize,
    template: Template,
}

impl Entry {
    fn of(node: &ClusterNode) -> Self {
        Self {
            node: node.id,
            saturation: node.saturation,
            wildcards: node.template.wildcard_count(),
            template: node.template.clone(),
        }
    }

    /// Saturation descending, then fewer wildcards, then lower id.
    fn order(&self, other: &Entry) -> Ordering {
        other
            .saturation
            .total_cmp(&self.saturation)
            .then(self.wildcards.cmp(&other.wildcards))
            .then(self.node.cmp(&other.node))
    }

    fn result(&self) -> MatchResult {
        MatchResult {
            node_id: self.node,
            saturation: self.saturation,
            matched: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct GroupIndex {
    /// Templates without wildcards, by vector key.
    literal: HashMap<u64, Vec<Entry>, BuildNoHashHasher<u64>>,
    /// Templates with at least one wildcard, in match order.
    wildcard: Vec<Entry>,
}

impl GroupIndex {
    fn insert(&mut self, entry: Entry) {
        if entry.wildcards == 0 {
            let key = vector_key(&hashes_of(&entry.template));
            let bucket = self.literal.entry(key).or_default();
            let at = bucket.partition_point(|e| e.order(&entry) == Ordering::Less);
            bucket.insert(at, entry);
        } else {
            let at = self.wildcard.partition_point(|e| e.order(&entry) == Ordering::Less);
            self.wildcard.insert(at, entry);
        }
    }

    fn find(&self, hashes: &[u64]) -> Option<&Entry> {
        let exact = self
            .literal
            .get(&vector_key(hashes))
            .and_then(|bucket| bucket.iter().find(|e| e.template.matches(hashes)));
        for e in &self.wildcard {
            if let Some(x) = exact {
                if e.order(x) != Ordering::Less {
                    break;
                }
            }
            if e.template.matches(hashes) {
                return Some(e);
            }
        }
        exact
    }

    fn len(&self) -> usize {
        self.wildcard.len() + self.literal.values().map(Vec::len).sum::<usize>()
    }
}

fn hashes_of(t: &Template) -> Vec<u64> {
    t.cells.iter().map(|c| c.hash()).collect()
}

/// Per-group candidate lists in match order.
#[derive(Debug, Clone, Default)]
pub struct MatchIndex {
    groups: HashMap<GroupKey, GroupIndex>,
    prefix_k: usize,
    tier: IndexTier,
}

impl MatchIndex {
    /// Index of the maximal-precision tier.
    pub fn build(model: &ParseModel, prefix_k: usize) -> Self {
        Self::build_tier(model, prefix_k, IndexTier::Leaves)
    }

    pub fn build_tier(model: &ParseModel, prefix_k: usize, tier: IndexTier) -> Self {
        let mut index = Self {
            groups: HashMap::new(),
            prefix_k,
            tier,
        };
        for key in model.roots.keys() {
            index.rebuild_group(model, key);
        }
        index
    }

    pub fn tier(&self) -> IndexTier {
        self.tier
    }

    pub fn prefix_k(&self) -> usize {
        self.prefix_k
    }

    /// Number of indexed templates.
    pub fn len(&self) -> usize {
        self.groups.values().map(GroupIndex::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rebuild_group(&mut self, model: &ParseModel, key: &GroupKey) {
        let mut group = GroupIndex::default();
        if let Some(&root) = model.roots.get(key) {
            let mut seen = HashSet::new();
            let mut stack = vec![root];
            while let Some(id) = stack.pop() {
                let node = &model.nodes[&id];
                if !node.is_leaf() {
                    stack.extend(node.children.iter().copied());
                    continue;
                }
                let chosen = match self.tier {
                    IndexTier::Leaves => id,
                    IndexTier::Threshold(t) => model.ancestor_at_threshold(id, t).unwrap_or(id),
                };
                if seen.insert(chosen) {
                    group.insert(Entry::of(&model.nodes[&chosen]));
                }
            }
        }
        self.groups.insert(key.clone(), group);
    }

    /// First candidate of the log's group, in index order, whose template
    /// matches every position.
    pub fn find(&self, hashes: &[u64]) -> Option<MatchResult> {
        let take = self.prefix_k.min(hashes.len());
        let key = GroupKey {
            length: hashes.len(),
            prefix: hashes[..take].to_vec(),
        };
        self.groups.get(&key)?.find(hashes).map(Entry::result)
    }

    /// Node ids of one group in match order.
    pub fn candidates(&self, key: &GroupKey) -> Vec<NodeId> {
        let Some(group) = self.groups.get(key) else {
            return Vec::new();
        };
        let mut all: Vec<&Entry> = group.wildcard.iter().chain(group.literal.values().flatten()).collect();
        all.sort_by(|a, b| a.order(b));
        all.into_iter().map(|e| e.node).collect()
    }
}

/// Build the default index for `model`.
pub fn rebuild_index(model: &ParseModel, prefix_k: usize) -> MatchIndex {
    MatchIndex::build(model, prefix_k)
}

/// Match one log.
pub fn match_log(log: &EncodedLog, index: &MatchIndex) -> Option<MatchResult> {
    index.find(&log.hashes)
}

/// Match `log`, or insert it as a temporary leaf of saturation 1 under its
/// group root and return that leaf.
///
/// A missing group root is created as an all-wildcard node of saturation 0.
/// A root that is itself fully saturated gets a saturation-0 parent so the
/// new leaf can sit beside it. The root's count and template absorb the log.
pub fn match_or_insert(
    log: &EncodedLog,
    model: &mut ParseModel,
    index: &mut MatchIndex,
) -> Result<MatchResult> {
    if let Some(found) = index.find(&log.hashes) {
        return Ok(found);
    }
    if log.is_empty() || log.count == 0 {
        return Err(Error::InvalidInput("cannot insert an empty log".into()));
    }
    let key = GroupKey::of(&log.hashes, index.prefix_k);
    let verbatim = Template::verbatim(log);
    let mut next = model.next_id().0;
    let mut fresh_id = || {
        let id = NodeId(next);
        next += 1;
        id
    };

    let root = match model.roots.get(&key).copied() {
        None => {
            let id = fresh_id();
            model.nodes.insert(
                id,
                ClusterNode {
                    id,
                    parent: None,
                    children: Vec::new(),
                    template: Template::all_wildcards(log.len()),
                    saturation: 0.0,
                    log_count: 0,
                    group_key: key.clone(),
                    temporary: true,
                },
            );
            model.roots.insert(key.clone(), id);
            id
        }
        Some(old) if model.nodes[&old].saturation >= 1.0 => {
            let id = fresh_id();
            let old_node = model.nodes.get_mut(&old).expect("root exists");
            old_node.parent = Some(id);
            let synthetic = ClusterNode {
                id,
                parent: None,
                children: vec![old],
                template: old_node.template.clone(),
                saturation: 0.0,
                log_count: old_node.log_count,
                group_key: key.clone(),
                temporary: true,
            };
            model.nodes.insert(id, synthetic);
            model.roots.insert(key.clone(), id);
            id
        }
        Some(existing) => existing,
    };

    let leaf = fresh_id();
    model.nodes.insert(
        leaf,
        ClusterNode {
            id: leaf,
            parent: Some(root),
            children: Vec::new(),
            template: verbatim,
            saturation: 1.0,
            log_count: log.count,
            group_key: key.clone(),
            temporary: true,
        },
    );
    let leaf_template = model.nodes[&leaf].template.clone();
    let root_node = model.nodes.get_mut(&root).expect("root exists");
    root_node.children.push(leaf);
    root_node.log_count += log.count;
    if root_node.children.len() > 1 {
        root_node.template = intersect(&root_node.template, &leaf_template);
    }

    match index.tier {
        IndexTier::Leaves => index
            .groups
            .entry(key)
            .or_default()
            .insert(Entry::of(&model.nodes[&leaf])),
        IndexTier::Threshold(_) => index.rebuild_group(model, &key),
    }
    Ok(MatchResult {
        node_id: leaf,
        saturation: 1.0,
        matched: false,
    })
}
