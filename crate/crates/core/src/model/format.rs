//! Model files: JSON Lines, one header object followed by one object per node
//! in ascending id order.
//!
//! ```text
//! {"format_version":1,"topic":"app","model_version":3,"hash_function_id":"xxh3-64","config_fingerprint":"…","trained_at":1718000000,"node_count":2}
//! {"id":0,"parent":null,"saturation":0.4,"log_count":9,"group_key":{"length":2,"prefix":[]},"template":[{"lit":"open"},"*"]}
//! {"id":1,"parent":0,"saturation":1.0,"log_count":9,"group_key":{"length":2,"prefix":[]},"template":[{"lit":"open"},"*"],"temporary":true}
//! ```
//!
//! `node_count` lets a reader reject truncated files. Children are implied by
//! parent links.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ParseModel;
use crate::error::{Error, Result};
use crate::hash::WILDCARD;
use crate::types::{Cell, ClusterNode, GroupKey, NodeId, Template};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    topic: String,
    model_version: u64,
    hash_function_id: String,
    config_fingerprint: String,
    trained_at: u64,
    node_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: u64,
    parent: Option<u64>,
    saturation: f64,
    log_count: u64,
    group_key: GroupKey,
    template: Vec<CellRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    temporary: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CellRecord {
    Literal { lit: String },
    Wildcard(String),
}

pub fn serialize(model: &ParseModel) -> Vec<u8> {
    let mut out = Vec::new();
    let header = Header {
        format_version: FORMAT_VERSION,
        topic: model.topic.clone(),
        model_version: model.version,
        hash_function_id: model.hash_function_id.clone(),
        config_fingerprint: model.config_fingerprint.clone(),
        trained_at: model.trained_at,
        node_count: model.nodes.len(),
    };
    serde_json::to_writer(&mut out, &header).expect("header serializes");
    out.push(b'\n');
    for node in model.nodes.values() {
        let record = NodeRecord {
            id: node.id.0,
            parent: node.parent.map(|p| p.0),
            saturation: node.saturation,
            log_count: node.log_count,
            group_key: node.group_key.clone(),
            template: node
                .template
                .cells
                .iter()
                .map(|c| match c {
                    Cell::Literal { text, .. } => CellRecord::Literal { lit: text.clone() },
                    Cell::Wildcard => CellRecord::Wildcard(WILDCARD.to_owned()),
                })
                .collect(),
            temporary: node.temporary,
        };
        serde_json::to_writer(&mut out, &record).expect("node serializes");
        out.push(b'\n');
    }
    out
}

fn parse_error(record: usize, node: Option<u64>, message: impl Into<String>) -> Error {
    Error::Parse {
        record,
        node,
        message: message.into(),
    }
}

/// Parse and validate a model file. Nothing is returned unless the whole file
/// is well-formed.
pub fn deserialize(bytes: &[u8]) -> Result<ParseModel> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_error(0, None, e.to_string()))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| parse_error(0, None, "missing header"))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| parse_error(0, None, format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(parse_error(
            0,
            None,
            format!("unsupported format version {}", header.format_version),
        ));
    }

    let mut nodes: BTreeMap<NodeId, ClusterNode> = BTreeMap::new();
    let mut record_no = 0;
    for (_, line) in lines {
        record_no += 1;
        let record: NodeRecord = serde_json::from_str(line).map_err(|e| {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id")?.as_u64());
            parse_error(record_no, id, e.to_string())
        })?;
        let id = NodeId(record.id);
        let cells = record
            .template
            .into_iter()
            .map(|c| match c {
                CellRecord::Literal { lit } if lit != WILDCARD => Cell::literal(lit),
                CellRecord::Wildcard(w) if w == WILDCARD => Ok(Cell::Wildcard),
                _ => Err(Error::InvalidInput("cell must be {\"lit\": text} or \"*\"".into())),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| parse_error(record_no, Some(record.id), e.to_string()))?;
        if !record.saturation.is_finite() {
            return Err(parse_error(record_no, Some(record.id), "saturation is not finite"));
        }
        let node = ClusterNode {
            id,
            parent: record.parent.map(NodeId),
            children: Vec::new(),
            template: Template::new(cells),
            saturation: record.saturation,
            log_count: record.log_count,
            group_key: record.group_key,
            temporary: record.temporary,
        };
        if nodes.insert(id, node).is_some() {
            return Err(parse_error(record_no, Some(record.id), "duplicate node id"));
        }
    }
    if nodes.len() != header.node_count {
        return Err(parse_error(
            record_no,
            None,
            format!(
                "header announces {} nodes, file has {} (truncated?)",
                header.node_count,
                nodes.len()
            ),
        ));
    }

    let mut roots = BTreeMap::new();
    let links: Vec<(NodeId, Option<NodeId>, GroupKey)> = nodes
        .values()
        .map(|n| (n.id, n.parent, n.group_key.clone()))
        .collect();
    for (id, parent, key) in links {
        match parent {
            Some(p) => match nodes.get_mut(&p) {
                Some(parent) => parent.children.push(id),
                None => return Err(Error::CorruptModel(format!("node {id} has missing parent {p}"))),
            },
            None => {
                if let Some(other) = roots.insert(key, id) {
                    return Err(Error::CorruptModel(format!(
                        "nodes {other} and {id} are both roots of one group"
                    )));
                }
            }
        }
    }
    let model = ParseModel {
        topic: header.topic,
        version: header.model_version,
        nodes,
        roots,
        config_fingerprint: header.config_fingerprint,
        hash_function_id: header.hash_function_id,
        trained_at: header.trained_at,
    };
    model.validate()?;
    Ok(model)
}
