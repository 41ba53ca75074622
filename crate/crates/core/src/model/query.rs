//! Threshold queries over a trained forest.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{display_template, ParseModel};
use crate::error::{Error, Result};
use crate::types::NodeId;

/// One template at a chosen precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRow {
    pub node_id: NodeId,
    pub display_text: String,
    pub saturation: f64,
    pub log_count: u64,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("threshold {threshold} is outside [0, 1]")))
    }
}

/// Resolve every `(node, count)` pair to its ancestor at `threshold` and sum
/// counts per resolved node. Rows are sorted by count, descending, then id.
pub fn rows_at_threshold(
    model: &ParseModel,
    threshold: f64,
    counts: impl IntoIterator<Item = (NodeId, u64)>,
) -> Result<Vec<TemplateRow>> {
    check_threshold(threshold)?;
    let mut totals: HashMap<NodeId, u64> = HashMap::new();
    for (id, count) in counts {
        let at = model.ancestor_at_threshold(id, threshold)?;
        *totals.entry(at).or_default() += count;
    }
    let mut rows = totals
        .into_iter()
        .map(|(id, log_count)| {
            let node = model.node(id)?;
            Ok(TemplateRow {
                node_id: id,
                display_text: display_template(&node.template),
                saturation: node.saturation,
                log_count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.log_count.cmp(&a.log_count).then(a.node_id.cmp(&b.node_id)));
    Ok(rows)
}

impl ParseModel {
    /// Templates at `threshold`, counting the logs recorded on each leaf.
    pub fn templates_at(&self, threshold: f64) -> Result<Vec<TemplateRow>> {
        rows_at_threshold(self, threshold, self.leaves().map(|n| (n.id, n.log_count)))
    }
}
