//! The trained forest: one precision tree per group, plus threshold queries.

use std::collections::{BTreeMap, BTreeSet};

use crate::clustering::Subtree;
use crate::config::TopicConfig;
use crate::error::{Error, Result};
use crate::hash::{encode_token, HASH_FUNCTION_ID, WILDCARD};
use crate::types::{Cell, ClusterNode, GroupKey, NodeId, Template};

mod format;
mod merge;
mod query;

pub use format::{deserialize, serialize, FORMAT_VERSION};
pub use merge::{merge_models, template_similarity};
pub use query::{rows_at_threshold, TemplateRow};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseModel {
    pub topic: String,
    pub version: u64,
    pub nodes: BTreeMap<NodeId, ClusterNode>,
    pub roots: BTreeMap<GroupKey, NodeId>,
    pub config_fingerprint: String,
    pub hash_function_id: String,
    /// Unix seconds.
    pub trained_at: u64,
}

impl ParseModel {
    pub fn empty(topic: impl Into<String>, config: &TopicConfig) -> Self {
        Self {
            topic: topic.into(),
            version: 0,
            nodes: BTreeMap::new(),
            roots: BTreeMap::new(),
            config_fingerprint: config.fingerprint(),
            hash_function_id: HASH_FUNCTION_ID.to_owned(),
            trained_at: 0,
        }
    }

    /// Assemble a model from per-group trees, numbering nodes in group order.
    /// Returns the model and, per subtree, the id of each subtree node.
    pub fn from_subtrees(
        topic: impl Into<String>,
        config: &TopicConfig,
        trained_at: u64,
        subtrees: impl IntoIterator<Item = (GroupKey, Subtree)>,
    ) -> (Self, Vec<Vec<NodeId>>) {
        let mut model = Self::empty(topic, config);
        model.version = 1;
        model.trained_at = trained_at;
        let mut ids = Vec::new();
        let mut next = 0u64;
        for (key, tree) in subtrees {
            let local: Vec<NodeId> = (0..tree.nodes.len() as u64).map(|i| NodeId(next + i)).collect();
            next += tree.nodes.len() as u64;
            for (i, n) in tree.nodes.into_iter().enumerate() {
                model.nodes.insert(
                    local[i],
                    ClusterNode {
                        id: local[i],
                        parent: n.parent.map(|p| local[p]),
                        children: n.children.iter().map(|&c| local[c]).collect(),
                        template: n.template,
                        saturation: n.saturation,
                        log_count: n.log_count,
                        group_key: key.clone(),
                        temporary: false,
                    },
                );
            }
            model.roots.insert(key, local[0]);
            ids.push(local);
        }
        (model, ids)
    }

    pub fn node(&self, id: NodeId) -> Result<&ClusterNode> {
        self.nodes.get(&id).ok_or(Error::NodeNotFound(id))
    }

    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.keys().next_back().map_or(0, |id| id.0 + 1))
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ClusterNode> {
        self.nodes.values().filter(|n| n.is_leaf())
    }

    pub fn has_temporary(&self) -> bool {
        self.nodes.values().any(|n| n.temporary)
    }

    /// Total log count over all roots.
    pub fn total_count(&self) -> u64 {
        self.roots.values().map(|id| self.nodes[id].log_count).sum()
    }

    /// `id` followed by its ancestors up to the root.
    pub fn ancestors(&self, id: NodeId) -> Result<Vec<NodeId>> {
        let mut chain = vec![id];
        let mut node = self.node(id)?;
        while let Some(p) = node.parent {
            if chain.len() > self.nodes.len() {
                return Err(Error::CorruptModel(format!("cycle above node {id}")));
            }
            chain.push(p);
            node = self.node(p)?;
        }
        Ok(chain)
    }

    /// The coarsest ancestor-or-self whose saturation meets `threshold`, or
    /// `id` itself when even it falls short.
    pub fn ancestor_at_threshold(&self, id: NodeId, threshold: f64) -> Result<NodeId> {
        let mut current = self.node(id)?;
        if current.saturation < threshold {
            return Ok(id);
        }
        while let Some(p) = current.parent {
            let parent = self.node(p)?;
            if parent.saturation < threshold {
                break;
            }
            current = parent;
        }
        Ok(current.id)
    }

    /// Check forest well-formedness and the saturation and count invariants.
    pub fn validate(&self) -> Result<()> {
        let corrupt = |msg: String| Err(Error::CorruptModel(msg));
        if self.hash_function_id != HASH_FUNCTION_ID {
            return Err(Error::IncompatibleModel(format!(
                "model hashes tokens with {:?}, this build uses {HASH_FUNCTION_ID:?}",
                self.hash_function_id
            )));
        }
        for (&id, node) in &self.nodes {
            if node.id != id {
                return corrupt(format!("node stored under {id} claims id {}", node.id));
            }
            if !(0.0..=1.0).contains(&node.saturation) {
                return corrupt(format!("node {id} has saturation {}", node.saturation));
            }
            if node.template.len() != node.group_key.length {
                return corrupt(format!(
                    "node {id} template has {} cells, group length is {}",
                    node.template.len(),
                    node.group_key.length
                ));
            }
            for cell in &node.template.cells {
                if let Cell::Literal { text, hash } = cell {
                    if text.is_empty() || text == WILDCARD || *hash != encode_token(text) {
                        return corrupt(format!("node {id} has a malformed literal {text:?}"));
                    }
                }
            }
            match node.parent {
                None => {
                    if self.roots.get(&node.group_key) != Some(&id) {
                        return corrupt(format!("root {id} is not the registered root of its group"));
                    }
                }
                Some(p) => {
                    let Some(parent) = self.nodes.get(&p) else {
                        return corrupt(format!("node {id} has missing parent {p}"));
                    };
                    if !parent.children.contains(&id) {
                        return corrupt(format!("parent {p} does not list child {id}"));
                    }
                    if parent.group_key != node.group_key {
                        return corrupt(format!("node {id} and parent {p} disagree on group"));
                    }
                    if node.saturation <= parent.saturation {
                        return corrupt(format!(
                            "node {id} saturation {} does not exceed parent {p} saturation {}",
                            node.saturation, parent.saturation
                        ));
                    }
                }
            }
            let mut seen = BTreeSet::new();
            let mut sum = 0u64;
            for c in &node.children {
                let Some(child) = self.nodes.get(c) else {
                    return corrupt(format!("node {id} lists missing child {c}"));
                };
                if child.parent != Some(id) || !seen.insert(*c) {
                    return corrupt(format!("node {id} lists child {c} inconsistently"));
                }
                sum += child.log_count;
            }
            if !node.children.is_empty() && sum != node.log_count {
                return corrupt(format!(
                    "node {id} log_count {} differs from its children's total {sum}",
                    node.log_count
                ));
            }
        }
        for (key, id) in &self.roots {
            match self.nodes.get(id) {
                Some(n) if n.parent.is_none() && &n.group_key == key => {}
                _ => return corrupt(format!("group root {id} is missing or not a root")),
            }
        }
        // Parent links only point at existing nodes, and strict saturation
        // increase rules out cycles, so every node reaches a root.
        Ok(())
    }

    /// Copy of the model with temporary nodes removed. Orphaned nodes become
    /// group roots; internal counts and templates are recomputed bottom-up.
    pub fn without_temporary(&self) -> Self {
        let mut out = self.clone();
        out.nodes.retain(|_, n| !n.temporary);
        out.roots.clear();
        let kept: BTreeSet<NodeId> = out.nodes.keys().copied().collect();
        for node in out.nodes.values_mut() {
            node.children.retain(|c| kept.contains(c));
            if node.parent.is_some_and(|p| !kept.contains(&p)) {
                node.parent = None;
            }
        }
        for node in out.nodes.values() {
            if node.parent.is_none() {
                out.roots.insert(node.group_key.clone(), node.id);
            }
        }
        let roots: Vec<NodeId> = out.roots.values().copied().collect();
        for root in roots {
            out.recompute(root);
        }
        out
    }

    /// Post-order refresh of internal counts and templates.
    fn recompute(&mut self, id: NodeId) {
        let children = self.nodes[&id].children.clone();
        if children.is_empty() {
            return;
        }
        let mut count = 0;
        let mut template: Option<Template> = None;
        for c in &children {
            self.recompute(*c);
            let child = &self.nodes[c];
            count += child.log_count;
            template = Some(match template {
                None => child.template.clone(),
                Some(t) => intersect(&t, &child.template),
            });
        }
        let node = self.nodes.get_mut(&id).expect("node exists");
        node.log_count = count;
        if let Some(t) = template {
            node.template = t;
        }
    }
}

/// Positionwise intersection: literals shared by both sides stay, everything
/// else becomes a wildcard. Templates must have equal length.
pub fn intersect(a: &Template, b: &Template) -> Template {
    Template::new(
        a.cells
            .iter()
            .zip(&b.cells)
            .map(|(x, y)| if x == y { x.clone() } else { Cell::Wildcard })
            .collect(),
    )
}

/// Template text with each run of consecutive wildcards shown as one `*`.
pub fn display_template(t: &Template) -> String {
    let mut parts: Vec<&str> = Vec::with_capacity(t.len());
    for cell in &t.cells {
        if cell.is_wildcard() && parts.last() == Some(&WILDCARD) {
            continue;
        }
        parts.push(cell.text());
    }
    parts.join(" ")
}

/// Equal up to log counts, version and training time.
pub fn structurally_equal(a: &ParseModel, b: &ParseModel) -> bool {
    a.topic == b.topic
        && a.config_fingerprint == b.config_fingerprint
        && a.hash_function_id == b.hash_function_id
        && a.roots == b.roots
        && a.nodes.len() == b.nodes.len()
        && a.nodes.iter().zip(&b.nodes).all(|((ia, na), (ib, nb))| {
            ia == ib
                && na.parent == nb.parent
                && na.children == nb.children
                && na.template == nb.template
                && na.saturation == nb.saturation
                && na.group_key == nb.group_key
                && na.temporary == nb.temporary
        })
}
