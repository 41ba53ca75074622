//! One level of splitting: early stop and the iterative clustering pass.

use std::collections::HashMap;

use rand::Rng;

use super::stats::{saturation, similarity_with, ClusterStats, PositionClass};
use crate::types::EncodedLog;

/// Refinement rounds per clustering pass.
pub const ITERATION_CAP: usize = 10;

/// Similarities closer than this count as tied.
const TIE_EPSILON: f64 = 1e-12;

/// Which early-stop condition fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EarlyStop {
    FewLogs,
    SingleUnresolved,
    DistinctVariables,
}

/// Decide whether `logs[members]` must end as one leaf per unique log.
///
/// `SingleUnresolved` only fires when the lone unresolved position has two
/// values, each carried by at most two unique logs. With more values, or a
/// value shared by three logs, a subset of three or more logs can be fully
/// resolved and clustering would keep it together.
pub fn early_stop_rule(
    stats: &ClusterStats,
    logs: &[EncodedLog],
    members: &[usize],
) -> Option<EarlyStop> {
    if stats.unique() <= 2 {
        return Some(EarlyStop::FewLogs);
    }
    let classes = stats.classes();
    let mut unresolved = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| **c == PositionClass::Unresolved)
        .map(|(i, _)| i);
    match (unresolved.next(), unresolved.next()) {
        (None, _) => classes
            .iter()
            .any(|c| *c == PositionClass::FullyVariable)
            .then_some(EarlyStop::DistinctVariables),
        (Some(pos), None) => {
            if stats.distinct(pos) != 2 {
                return None;
            }
            let mut carriers: HashMap<u64, usize> = HashMap::new();
            for &idx in members {
                *carriers.entry(logs[idx].hashes[pos]).or_default() += 1;
            }
            carriers
                .values()
                .all(|&c| c <= 2)
                .then_some(EarlyStop::SingleUnresolved)
        }
        _ => None,
    }
}

/// One singleton part per member when an early-stop rule applies.
pub fn early_stop(
    stats: &ClusterStats,
    logs: &[EncodedLog],
    members: &[usize],
) -> Option<Vec<Vec<usize>>> {
    early_stop_rule(stats, logs, members).map(|_| singletons(members))
}

pub(crate) fn singletons(members: &[usize]) -> Vec<Vec<usize>> {
    members.iter().map(|&m| vec![m]).collect()
}

/// Largest number of logs refinement rounds run on while seeds are being
/// added. Bigger nodes refine on a random sample plus the seeds, and the final
/// clusters are refined once more on every member.
pub const SAMPLE_LIMIT: usize = 2048;

/// Split `logs[members]` (pairwise distinct, at least three) into parts whose
/// saturation each exceeds the parent's.
///
/// Two seed logs are chosen farthest-first and refined by repeated
/// max-similarity assignment; exact ties go to a uniformly random tied
/// cluster. While some part fails to improve on the parent, another seed is
/// added at the log farthest from every seed and refinement restarts from the
/// seeds. With as many seeds as logs the answer is one part per log. A node
/// with more than `max_clusters` logs that cannot be split within
/// `max_clusters` seeds is not split at all and `None` is returned.
pub fn cluster_once<R: Rng + ?Sized>(
    logs: &[EncodedLog],
    members: &[usize],
    parent: &ClusterStats,
    max_clusters: usize,
    rng: &mut R,
) -> Option<Vec<Vec<usize>>> {
    let u = members.len();
    if u <= 2 {
        return Some(singletons(members));
    }
    let parent_sat = saturation(parent);
    let improves = |clusters: &[ClusterStats]| clusters.iter().all(|c| saturation(c) > parent_sat);
    let cap = max_clusters.clamp(2, u);
    let sampled = u > SAMPLE_LIMIT;
    let mut pool: Vec<usize> = if sampled {
        let mut picked = rand::seq::index::sample(rng, u, SAMPLE_LIMIT).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| members[i]).collect()
    } else {
        members.to_vec()
    };

    // Distance from each member to its nearest seed.
    let mut nearest = vec![f64::INFINITY; u];
    let mut seeds: Vec<ClusterStats> = Vec::new();
    let mut next = members[rng.gen_range(0..u)];
    loop {
        let seed = stats_of(logs, &[next]);
        let weights = seed.weights();
        for (d, &idx) in nearest.iter_mut().zip(members) {
            *d = d.min(1.0 - similarity_with(&logs[idx].hashes, &seed, &weights));
        }
        seeds.push(seed);
        if sampled && !pool.contains(&next) {
            pool.push(next);
        }
        if seeds.len() >= 2 {
            // Every round restarts from the seed logs, so a new seed is not
            // drowned out by clusters whose statistics are already settled.
            let mut clusters = seeds.clone();
            let parts = refine(logs, &pool, &mut clusters, rng);
            if improves(&clusters) {
                if !sampled {
                    return Some(parts);
                }
                let parts = refine(logs, members, &mut clusters, rng);
                return improves(&clusters).then_some(parts);
            }
            if seeds.len() >= cap {
                return (cap >= u).then(|| singletons(members));
            }
        }
        next = members[farthest(&nearest)];
    }
}

fn stats_of(logs: &[EncodedLog], part: &[usize]) -> ClusterStats {
    ClusterStats::from_members(logs, part).expect("members share one length")
}

/// Index of the largest distance, first on ties.
fn farthest(distances: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in distances.iter().enumerate() {
        if d > distances[best] {
            best = i;
        }
    }
    best
}

/// Assign-and-rebuild until stable or [`ITERATION_CAP`]. Empty clusters are
/// dropped; on return `clusters[i]` describes `parts[i]`.
fn refine<R: Rng + ?Sized>(
    logs: &[EncodedLog],
    members: &[usize],
    clusters: &mut Vec<ClusterStats>,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut assignment = vec![usize::MAX; members.len()];
    let mut parts = Vec::new();
    let mut tied = Vec::new();
    for _ in 0..ITERATION_CAP {
        let weights: Vec<_> = clusters.iter().map(ClusterStats::weights).collect();
        let mut changed = false;
        for (slot, &idx) in assignment.iter_mut().zip(members) {
            let hashes = &logs[idx].hashes;
            let mut best = f64::NEG_INFINITY;
            tied.clear();
            for (c, (stats, w)) in clusters.iter().zip(&weights).enumerate() {
                let sim = similarity_with(hashes, stats, w);
                if tied.is_empty() || sim > best + TIE_EPSILON {
                    best = sim;
                    tied.clear();
                    tied.push(c);
                } else if sim >= best - TIE_EPSILON {
                    tied.push(c);
                }
            }
            // A log already in one of the tied clusters stays put.
            let pick = if tied.len() == 1 {
                tied[0]
            } else if tied.contains(slot) {
                *slot
            } else {
                tied[rng.gen_range(0..tied.len())]
            };
            if *slot != pick {
                *slot = pick;
                changed = true;
            }
        }

        let mut grouped = vec![Vec::new(); clusters.len()];
        for (&c, &idx) in assignment.iter().zip(members) {
            grouped[c].push(idx);
        }
        let mut remap = vec![usize::MAX; clusters.len()];
        parts.clear();
        for (c, part) in grouped.into_iter().enumerate() {
            if !part.is_empty() {
                remap[c] = parts.len();
                parts.push(part);
            }
        }
        for c in assignment.iter_mut() {
            *c = remap[*c];
        }
        *clusters = parts
            .iter()
            .map(|p| ClusterStats::from_members(logs, p).expect("members share one length"))
            .collect();
        if !changed {
            break;
        }
    }
    parts
}
