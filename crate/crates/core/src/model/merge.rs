//! Folding a freshly trained model into the previous one.

use std::collections::VecDeque;

use super::{intersect, ParseModel};
use crate::error::{Error, Result};
use crate::types::{ClusterNode, NodeId, Template};

/// Share of positions where the two templates can accept the same token.
/// Templates of different length score 0.
pub fn template_similarity(a: &Template, b: &Template) -> f64 {
    if a.len() != b.len() {
        return 0.0;
    }
    if a.is_empty() {
        return 1.0;
    }
    let compatible = a
        .cells
        .iter()
        .zip(&b.cells)
        .filter(|(x, y)| x.compatible(y))
        .count();
    compatible as f64 / a.len() as f64
}

/// Merge `fresh` into `previous`.
///
/// Roots of the same group are merged; below a merged pair, each fresh child
/// is merged into the most similar unused previous child when their template
/// similarity reaches `threshold`, and is otherwise attached with its whole
/// subtree. Merged nodes sum their counts, intersect their templates and keep
/// the smaller saturation. Groups only present in `fresh` are adopted.
pub fn merge_models(previous: &ParseModel, fresh: &ParseModel, threshold: f64) -> Result<ParseModel> {
    if previous.topic != fresh.topic {
        return Err(Error::IncompatibleModel(format!(
            "topics differ: {:?} vs {:?}",
            previous.topic, fresh.topic
        )));
    }
    if previous.config_fingerprint != fresh.config_fingerprint {
        return Err(Error::IncompatibleModel("configuration fingerprints differ".into()));
    }
    if previous.hash_function_id != fresh.hash_function_id {
        return Err(Error::IncompatibleModel(format!(
            "hash functions differ: {} vs {}",
            previous.hash_function_id, fresh.hash_function_id
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!("merge threshold {threshold} outside [0, 1]")));
    }

    let mut out = previous.clone();
    out.version = previous.version.max(fresh.version) + 1;
    out.trained_at = previous.trained_at.max(fresh.trained_at);
    let mut next = out.next_id().0;
    for (key, &froot) in &fresh.roots {
        match out.roots.get(key).copied() {
            Some(proot) => merge_into(&mut out, proot, fresh, froot, threshold, &mut next),
            None => {
                let id = adopt(&mut out, fresh, froot, None, &mut next);
                out.roots.insert(key.clone(), id);
            }
        }
    }
    out.validate()
        .map_err(|e| Error::Invariant(format!("merge produced an invalid model: {e}")))?;
    Ok(out)
}

fn merge_into(
    out: &mut ParseModel,
    target: NodeId,
    fresh: &ParseModel,
    source: NodeId,
    threshold: f64,
    next: &mut u64,
) {
    let src = &fresh.nodes[&source];
    let mut existing = out.nodes[&target].children.clone();
    // When only one side has children, the other side's logs go down as an
    // extra child so internal counts stay the sum of their children.
    let fresh_children = if src.is_leaf() && !existing.is_empty() {
        vec![source]
    } else {
        src.children.clone()
    };
    if existing.is_empty() && !src.is_leaf() {
        let id = NodeId(*next);
        *next += 1;
        let copy = ClusterNode {
            id,
            parent: Some(target),
            children: Vec::new(),
            temporary: false,
            ..out.nodes[&target].clone()
        };
        out.nodes.insert(id, copy);
        existing.push(id);
    }
    {
        let node = out.nodes.get_mut(&target).expect("target exists");
        node.log_count += src.log_count;
        node.template = intersect(&node.template, &src.template);
        node.saturation = node.saturation.min(src.saturation);
        node.children = existing.clone();
    }
    let mut used = vec![false; existing.len()];
    for fc in fresh_children {
        let ft = &fresh.nodes[&fc].template;
        let mut best: Option<(usize, f64)> = None;
        for (i, pc) in existing.iter().enumerate() {
            if used[i] {
                continue;
            }
            let s = template_similarity(&out.nodes[pc].template, ft);
            // `existing` is in id order, so strict improvement keeps the lower id.
            if s >= threshold && best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        match best {
            Some((i, _)) => {
                used[i] = true;
                merge_into(out, existing[i], fresh, fc, threshold, next);
            }
            None => {
                let id = adopt(out, fresh, fc, Some(target), next);
                out.nodes.get_mut(&target).expect("target exists").children.push(id);
            }
        }
    }
    let lowest_child = out.nodes[&target]
        .children
        .iter()
        .map(|c| out.nodes[c].saturation)
        .fold(f64::INFINITY, f64::min);
    let node = out.nodes.get_mut(&target).expect("target exists");
    if node.saturation >= lowest_child {
        node.saturation = lowest_child.next_down();
    }
}

/// Copy the subtree of `fresh` rooted at `source` into `out` under fresh ids.
fn adopt(
    out: &mut ParseModel,
    fresh: &ParseModel,
    source: NodeId,
    parent: Option<NodeId>,
    next: &mut u64,
) -> NodeId {
    let top = NodeId(*next);
    let mut queue = VecDeque::from([(source, parent)]);
    while let Some((src, parent)) = queue.pop_front() {
        let id = NodeId(*next);
        *next += 1;
        let node = &fresh.nodes[&src];
        out.nodes.insert(
            id,
            ClusterNode {
                id,
                parent,
                children: Vec::new(),
                ..node.clone()
            },
        );
        // The caller links the subtree top to its parent.
        if let (Some(p), false) = (parent, id == top) {
            out.nodes.get_mut(&p).expect("parent copied").children.push(id);
        }
        for &c in &node.children {
            queue.push_back((c, Some(id)));
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::super::structurally_equal;
    use super::super::tests::chain_model;
    use super::*;
    use crate::config::TopicConfig;
    use crate::types::GroupKey;

    #[test]
    fn similarity_examples() {
        let t = |s: &str| Template::parse(s).unwrap();
        assert_eq!(template_similarity(&t("a b *"), &t("a b *")), 1.0);
        assert_eq!(template_similarity(&t("users *"), &t("users * *")), 0.0);
        assert_eq!(
            template_similarity(&t("release lock * flg *"), &t("release lock * flags *")),
            0.8
        );
        let (a, b) = (t("x * z"), t("x y q"));
        assert_eq!(template_similarity(&a, &b), template_similarity(&b, &a));
    }

    #[test]
    fn self_merge_keeps_structure() {
        let m = chain_model();
        let merged = merge_models(&m, &m, 0.9).unwrap();
        merged.validate().unwrap();
        assert!(structurally_equal(&m, &merged));
        assert_eq!(merged.version, m.version + 1);
        assert_eq!(merged.total_count(), 2 * m.total_count());
    }

    #[test]
    fn new_group_is_adopted() {
        let m = chain_model();
        let mut other = ParseModel::empty("t", &TopicConfig::default());
        let key = GroupKey { length: 2, prefix: vec![] };
        other.nodes.insert(
            NodeId(0),
            ClusterNode {
                id: NodeId(0),
                parent: None,
                children: vec![],
                template: Template::parse("hello world").unwrap(),
                saturation: 1.0,
                log_count: 2,
                group_key: key.clone(),
                temporary: false,
            },
        );
        other.roots.insert(key.clone(), NodeId(0));
        let merged = merge_models(&m, &other, 0.9).unwrap();
        merged.validate().unwrap();
        let root = merged.roots[&key];
        assert_eq!(root, NodeId(5));
        assert_eq!(merged.nodes[&root].template.raw_text(), "hello world");
        assert_eq!(merged.total_count(), m.total_count() + 2);
    }

    #[test]
    fn similar_children_merge_and_dissimilar_attach() {
        let key = GroupKey { length: 5, prefix: vec![] };
        let model = |child: &str, count: u64| {
            let mut m = ParseModel::empty("t", &TopicConfig::default());
            let mk = |id: u64, parent: Option<u64>, text: &str, sat: f64, children: Vec<NodeId>| ClusterNode {
                id: NodeId(id),
                parent: parent.map(NodeId),
                children,
                template: Template::parse(text).unwrap(),
                saturation: sat,
                log_count: count,
                group_key: key.clone(),
                temporary: false,
            };
            m.nodes.insert(NodeId(0), mk(0, None, "* lock * * *", 0.05, vec![NodeId(1)]));
            m.nodes.insert(NodeId(1), mk(1, Some(0), child, 0.78, vec![]));
            m.roots.insert(key.clone(), NodeId(0));
            m
        };
        let prev = model("release lock * flg *", 3);
        let fresh = model("release lock * flags *", 2);

        let merged = merge_models(&prev, &fresh, 0.7).unwrap();
        merged.validate().unwrap();
        assert_eq!(merged.nodes.len(), 2);
        let child = &merged.nodes[&NodeId(1)];
        assert_eq!(child.log_count, 5);
        assert_eq!(child.template.raw_text(), "release lock * * *");

        let kept = merge_models(&prev, &fresh, 0.9).unwrap();
        kept.validate().unwrap();
        assert_eq!(kept.nodes.len(), 3);
        assert_eq!(kept.nodes[&NodeId(0)].children, [NodeId(1), NodeId(2)]);
        assert_eq!(kept.nodes[&NodeId(0)].log_count, 5);
    }

    #[test]
    fn incompatible_models_are_rejected() {
        let m = chain_model();
        let mut other = m.clone();
        other.config_fingerprint = "different".into();
        assert!(matches!(merge_models(&m, &other, 0.9), Err(Error::IncompatibleModel(_))));
        let mut other = m.clone();
        other.topic = "u".into();
        assert!(merge_models(&m, &other, 0.9).is_err());
    }
}
