//! Offline training: preprocess, deduplicate, group, and build every group's
//! tree.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clustering::{build_tree, TreeParams};
use crate::config::TopicConfig;
use crate::error::{Error, Result};
use crate::hash::digest;
use crate::model::ParseModel;
use crate::preprocess::{Deduplicator, Preprocessor, Scratch};
use crate::types::{EncodedLog, GroupKey, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Worker threads; `0` uses every core and `1` runs on the caller's
    /// thread.
    pub workers: usize,
    pub tree: TreeParams,
    /// Unix seconds recorded in the model.
    pub trained_at: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            tree: TreeParams::default(),
            trained_at: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainStats {
    pub lines: u64,
    pub skipped: u64,
    pub unique: usize,
    pub sampled: usize,
    pub groups: usize,
    pub nodes: usize,
    pub forced_leaves: usize,
    pub unsplit: usize,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: ParseModel,
    /// Leaf that clustering put each input line in; `None` for lines without
    /// tokens or outside the training sample.
    pub assignments: Vec<Option<NodeId>>,
    pub stats: TrainStats,
}

/// RNG for one group, derived from the topic seed and the group key so results
/// do not depend on scheduling.
pub fn group_rng(seed: u64, key: &GroupKey) -> ChaCha8Rng {
    let mut bytes = Vec::with_capacity(8 * (key.prefix.len() + 1));
    bytes.extend_from_slice(&(key.length as u64).to_le_bytes());
    for h in &key.prefix {
        bytes.extend_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::seed_from_u64(seed ^ digest(&bytes))
}

fn run<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Preprocess and deduplicate `lines`. Returns the unique logs and, per line,
/// the index of its unique log.
pub fn preprocess_lines<S: AsRef<str> + Sync>(
    pre: &Preprocessor,
    lines: &[S],
    workers: usize,
) -> Result<(Deduplicator, Vec<Option<usize>>)> {
    let chunk = |part: &[S]| {
        let mut dedup = Deduplicator::new();
        let mut scratch = Scratch::default();
        let idx: Vec<Option<usize>> = part
            .iter()
            .map(|l| dedup.push_line(pre, &mut scratch, l.as_ref()))
            .collect();
        (dedup, idx)
    };
    if workers == 1 || lines.len() < 4096 {
        return Ok(chunk(lines));
    }
    let threads = if workers == 0 {
        rayon::current_num_threads()
    } else {
        workers
    };
    let size = lines.len().div_ceil(threads * 4).max(1024);
    let parts: Vec<_> = run(workers, || lines.par_chunks(size).map(chunk).collect())?;
    let mut all = Deduplicator::new();
    let mut line_idx = Vec::with_capacity(lines.len());
    for (dedup, idx) in parts {
        let base = all.absorb(dedup);
        line_idx.extend(idx.into_iter().map(|i| i.map(|i| base[i])));
    }
    Ok((all, line_idx))
}

/// Train a model from raw lines.
pub fn train_lines<S: AsRef<str> + Sync>(
    topic: &str,
    config: &TopicConfig,
    lines: &[S],
    options: TrainOptions,
) -> Result<Trained> {
    config.validate()?;
    let pre = Preprocessor::new(config)?;
    let (dedup, line_idx) = preprocess_lines(&pre, lines, options.workers)?;
    let skipped = dedup.skipped();
    let (model, unique_leaf, mut stats) = train_unique(topic, config, dedup.into_logs(), options)?;
    stats.lines = lines.len() as u64;
    stats.skipped = skipped;
    let assignments = line_idx
        .into_iter()
        .map(|i| i.and_then(|i| unique_leaf[i]))
        .collect();
    Ok(Trained {
        model,
        assignments,
        stats,
    })
}

/// Train from encoded logs. Duplicates are collapsed first. Returns the
/// model, the leaf of each input log (`None` when not sampled) and stats.
pub fn train_logs(
    topic: &str,
    config: &TopicConfig,
    logs: Vec<EncodedLog>,
    options: TrainOptions,
) -> Result<(ParseModel, Vec<Option<NodeId>>, TrainStats)> {
    let mut dedup = Deduplicator::new();
    let idx: Vec<usize> = logs.into_iter().map(|l| dedup.push(l)).collect();
    let (model, unique_leaf, stats) = train_unique(topic, config, dedup.into_logs(), options)?;
    let leaves = idx.into_iter().map(|i| unique_leaf[i]).collect();
    Ok((model, leaves, stats))
}

fn train_unique(
    topic: &str,
    config: &TopicConfig,
    unique: Vec<EncodedLog>,
    options: TrainOptions,
) -> Result<(ParseModel, Vec<Option<NodeId>>, TrainStats)> {
    let total_unique = unique.len();
    let sampled: Vec<usize> = if total_unique > config.sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut picked = sample(&mut rng, total_unique, config.sample_cap).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..total_unique).collect()
    };

    let mut groups: BTreeMap<GroupKey, (Vec<usize>, Vec<EncodedLog>)> = BTreeMap::new();
    let mut unique = unique.into_iter().map(Some).collect::<Vec<_>>();
    for &u in &sampled {
        let log = unique[u].take().expect("each index sampled once");
        let entry = groups
            .entry(GroupKey::of(&log.hashes, config.prefix_k))
            .or_default();
        entry.0.push(u);
        entry.1.push(log);
    }
    let groups: Vec<(GroupKey, (Vec<usize>, Vec<EncodedLog>))> = groups.into_iter().collect();

    let build = |(key, (_, logs)): &(GroupKey, (Vec<usize>, Vec<EncodedLog>))| {
        let mut rng = group_rng(config.rng_seed, key);
        build_tree(logs, options.tree, &mut rng)
    };
    let trees: Vec<_> = if options.workers == 1 {
        groups.iter().map(build).collect::<Result<_>>()?
    } else {
        run(options.workers, || groups.par_iter().map(build).collect::<Result<Vec<_>>>())??
    };

    let forced_leaves = trees.iter().map(|t| t.forced_leaves).sum();
    let unsplit = trees.iter().map(|t| t.unsplit).sum();
    let leaf_of: Vec<Vec<usize>> = trees.iter().map(|t| t.leaf_of.clone()).collect();
    let (model, ids) = ParseModel::from_subtrees(
        topic,
        config,
        options.trained_at,
        groups.iter().map(|(k, _)| k.clone()).zip(trees),
    );
    let mut unique_leaf = vec![None; total_unique];
    for ((_, (members, _)), (leaves, ids)) in groups.iter().zip(leaf_of.iter().zip(&ids)) {
        for (&u, &leaf) in members.iter().zip(leaves) {
            unique_leaf[u] = Some(ids[leaf]);
        }
    }
    let stats = TrainStats {
        unique: total_unique,
        sampled: sampled.len(),
        groups: groups.len(),
        nodes: model.nodes.len(),
        forced_leaves,
        unsplit,
        ..Default::default()
    };
    Ok((model, unique_leaf, stats))
}
