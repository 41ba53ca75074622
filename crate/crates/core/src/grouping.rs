//! Initial grouping by token count and k-token prefix.

use std::collections::BTreeMap;

use crate::types::{EncodedLog, GroupKey};

pub fn group_key(log: &EncodedLog, k: usize) -> GroupKey {
    GroupKey::of(&log.hashes, k)
}

/// Split `logs` into disjoint groups. Within a group, logs keep their input
/// order.
pub fn partition(logs: Vec<EncodedLog>, k: usize) -> BTreeMap<GroupKey, Vec<EncodedLog>> {
    let mut groups: BTreeMap<GroupKey, Vec<EncodedLog>> = BTreeMap::new();
    for log in logs {
        groups.entry(group_key(&log, k)).or_default().push(log);
    }
    groups
}
