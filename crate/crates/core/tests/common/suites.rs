//! Property suites shared by the core property tests and the acceptance
//! target. Each suite runs a deterministic proptest runner and reports the
//! first failure as text.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use strata_core::clustering::{build_tree, early_stop, saturation, ClusterStats, TreeParams};
use strata_core::hash::{digest, token_hash};
use strata_core::matcher::{match_or_insert, rebuild_index};
use strata_core::model::{deserialize, serialize};
use strata_core::preprocess::deduplicate;
use strata_core::train::{train_logs, TrainOptions};
use strata_core::{EncodedLog, NodeId, ParseModel, TokenSequence, TopicConfig};

pub fn encoded(tokens: &[String]) -> EncodedLog {
    EncodedLog::encode(&TokenSequence::new(tokens.to_vec()).unwrap())
}

/// Logs whose positions draw from small per-position vocabularies, so that
/// constants, variables and mixed positions all occur.
pub fn corpus() -> impl Strategy<Value = Vec<EncodedLog>> {
    let group = (1usize..6, prop::collection::vec(1usize..6, 6)).prop_flat_map(|(len, vocab)| {
        let row = vocab[..len]
            .iter()
            .enumerate()
            .map(|(pos, &v)| (0..v).prop_map(move |t| format!("p{pos}v{t}")))
            .collect::<Vec<_>>();
        prop::collection::vec((row, 1u64..4), 1..25)
    });
    prop::collection::vec(group, 1..4).prop_map(|groups| {
        groups
            .into_iter()
            .flatten()
            .map(|(tokens, count)| encoded(&tokens).with_count(count))
            .collect()
    })
}

pub fn train(logs: Vec<EncodedLog>, seed: u64) -> ParseModel {
    let cfg = TopicConfig {
        rng_seed: seed,
        ..Default::default()
    };
    train_logs("prop", &cfg, logs, TrainOptions::default()).unwrap().0
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn report<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn strictly_increasing(model: &ParseModel) -> Result<(), TestCaseError> {
    for node in model.nodes.values() {
        if let Some(p) = node.parent {
            prop_assert!(node.saturation > model.nodes[&p].saturation, "edge {} -> {}", p, node.id);
        }
    }
    Ok(())
}

/// Every parent-child edge of a trained model strictly increases saturation.
pub fn saturation_increases_on_every_edge(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(corpus(), any::<u64>()), |(logs, seed)| {
        let model = train(logs, seed);
        model.validate().map_err(|e| TestCaseError::fail(e.to_string()))?;
        strictly_increasing(&model)
    }))
}

/// build_tree on deduplicated input equals build_tree on the expanded input.
pub fn dedup_builds_the_same_tree(cases: u32) -> Result<(), String> {
    let rows = prop::collection::vec((prop::collection::vec(0usize..3, 4), 1usize..4), 1..30);
    report(runner(cases).run(&(rows, any::<u64>(), any::<u64>()), |(rows, order_seed, seed)| {
        let mut expanded = Vec::new();
        for (row, copies) in &rows {
            let tokens: Vec<String> = row.iter().enumerate().map(|(i, t)| format!("t{i}_{t}")).collect();
            for _ in 0..*copies {
                expanded.push(encoded(&tokens));
            }
        }
        use rand::seq::SliceRandom;
        expanded.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
        let deduped = deduplicate(expanded.clone());

        let params = TreeParams::default();
        let a = build_tree(&expanded, params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = build_tree(&deduped, params, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(&a.nodes, &b.nodes);

        let sa = ClusterStats::from_logs(&expanded).unwrap();
        let sb = ClusterStats::from_logs(&deduped).unwrap();
        prop_assert_eq!(saturation(&sa), saturation(&sb));
        Ok(())
    }))
}

/// Template count is non-decreasing in the threshold, and the result at a
/// lower threshold is an ancestor of the result at a higher one.
pub fn threshold_queries_are_monotone(cases: u32) -> Result<(), String> {
    let ts = prop::collection::vec(0.0f64..=1.0, 2..6);
    report(runner(cases).run(&(corpus(), any::<u64>(), ts), |(logs, seed, mut ts)| {
        let model = train(logs, seed);
        ts.sort_by(f64::total_cmp);
        let leaves: Vec<NodeId> = model.leaves().map(|n| n.id).collect();
        let mut previous_count = 0;
        for pair in ts.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mut lo_set = HashSet::new();
            let mut hi_set = HashSet::new();
            for &leaf in &leaves {
                let a_lo = model.ancestor_at_threshold(leaf, lo).unwrap();
                let a_hi = model.ancestor_at_threshold(leaf, hi).unwrap();
                prop_assert!(model.ancestors(a_hi).unwrap().contains(&a_lo));
                lo_set.insert(a_lo);
                hi_set.insert(a_hi);
            }
            prop_assert!(lo_set.len() <= hi_set.len());
            prop_assert!(previous_count <= lo_set.len());
            prop_assert_eq!(model.templates_at(lo).unwrap().len(), lo_set.len());
            let total: u64 = model.templates_at(hi).unwrap().iter().map(|r| r.log_count).sum();
            prop_assert_eq!(total, model.total_count());
            previous_count = hi_set.len();
        }
        Ok(())
    }))
}

/// Serialize then deserialize reproduces the model, temporary nodes included.
pub fn model_files_round_trip(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(corpus(), corpus(), any::<u64>()), |(logs, extra, seed)| {
        let mut model = train(logs, seed);
        let mut index = rebuild_index(&model, 0);
        for log in &extra {
            match_or_insert(log, &mut model, &mut index).unwrap();
        }
        model.validate().unwrap();
        let bytes = serialize(&model);
        let back = deserialize(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(serialize(&back), bytes);
        Ok(())
    }))
}

/// Tokens whose hashes are compared across processes and pinned.
pub const HASH_PROBES: [&str; 5] = ["lock", "release", "acquire", "uid=1000", "blk_-1608999687919862906"];

/// One line per probe: `token hex-hash`, plus the digest of the empty input.
pub fn hash_fingerprint() -> String {
    let mut out = String::new();
    for t in HASH_PROBES {
        out.push_str(&format!("{t} {:016x}\n", token_hash(t).unwrap()));
    }
    out.push_str(&format!("digest() {:016x}\n", digest(b"")));
    out
}

/// `hash_fingerprint()` as computed by the reference XXH3-64 implementation
/// (python-xxhash 3.x).
pub const PINNED_FINGERPRINT: &str = "\
lock 0c8ac5fa760984e7
release c9283a60a9eace6e
acquire 9580d918eeb702f7
uid=1000 ea3bdc61a4a298ae
blk_-1608999687919862906 228aed77bbdc0c23
digest() 2d06800538d394c2
";

// Every reachable leaf partition of `mask` under exhaustive recursion: any
// split whose blocks all beat the parent's saturation may be taken, and
// recursion ends at saturation 1 or a single log.
fn reachable(logs: &[EncodedLog], mask: u32, memo: &mut HashMap<u32, BTreeSet<Vec<u32>>>) -> BTreeSet<Vec<u32>> {
    if let Some(r) = memo.get(&mask) {
        return r.clone();
    }
    let block_of = |b: u32| -> Vec<EncodedLog> {
        (0..logs.len()).filter(|i| b & (1 << i) != 0).map(|i| logs[i].clone()).collect()
    };
    let members = block_of(mask);
    let s = saturation(&ClusterStats::from_logs(&members).unwrap());
    let mut out = BTreeSet::new();
    if members.len() == 1 || s >= 1.0 {
        out.insert(vec![mask]);
    } else {
        for partition in set_partitions(mask) {
            if partition.len() < 2 {
                continue;
            }
            let valid = partition
                .iter()
                .all(|&b| saturation(&ClusterStats::from_logs(&block_of(b)).unwrap()) > s);
            if !valid {
                continue;
            }
            let mut combos: Vec<Vec<u32>> = vec![vec![]];
            for &b in &partition {
                let sub = reachable(logs, b, memo);
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        sub.iter().map(move |s| {
                            let mut c = c.clone();
                            c.extend(s);
                            c.sort_unstable();
                            c
                        })
                    })
                    .collect();
            }
            out.extend(combos);
        }
    }
    memo.insert(mask, out.clone());
    out
}

fn set_partitions(mask: u32) -> Vec<Vec<u32>> {
    if mask == 0 {
        return vec![vec![]];
    }
    let low = mask & mask.wrapping_neg();
    let rest = mask & !low;
    let mut out = Vec::new();
    // Choose the block containing the lowest element, then partition the rest.
    let mut sub = rest;
    loop {
        let block = low | sub;
        for mut tail in set_partitions(rest & !sub) {
            tail.push(block);
            out.push(tail);
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & rest;
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Whenever early stopping fires on a fixture of at most four unique logs,
/// exhaustive recursion over every valid split reaches only singleton leaves.
/// Returns (fixtures checked, fixtures where early stop fired).
pub fn early_stop_matches_exhaustive_recursion() -> Result<(usize, usize), String> {
    let mut checked = 0;
    let mut fired = 0;
    // (positions, values per position)
    for (m, v) in [(2usize, 4usize), (3, 3), (4, 2)] {
        let rows: Vec<Vec<String>> = (0..v.pow(m as u32))
            .map(|code| {
                let mut c = code;
                (0..m)
                    .map(|pos| {
                        let t = c % v;
                        c /= v;
                        format!("q{pos}{t}")
                    })
                    .collect()
            })
            .collect();
        for size in 1..=4usize {
            for combo in combinations(rows.len(), size) {
                for counts in [[1u64, 1, 1, 1], [3, 1, 1, 1], [1, 2, 5, 1]] {
                    let logs: Vec<EncodedLog> = combo
                        .iter()
                        .zip(counts)
                        .map(|(&i, c)| encoded(&rows[i]).with_count(c))
                        .collect();
                    let members: Vec<usize> = (0..logs.len()).collect();
                    let stats = ClusterStats::from_logs(&logs).unwrap();
                    checked += 1;
                    if saturation(&stats) >= 1.0 {
                        continue;
                    }
                    let Some(parts) = early_stop(&stats, &logs, &members) else {
                        continue;
                    };
                    fired += 1;
                    let full = (1u32 << logs.len()) - 1;
                    let outcomes = reachable(&logs, full, &mut HashMap::new());
                    let singletons: Vec<u32> = (0..logs.len() as u32).map(|i| 1 << i).collect();
                    let tokens: Vec<_> = logs.iter().map(|l| &l.tokens).collect();
                    if outcomes != [singletons].into_iter().collect() {
                        return Err(format!("exhaustive recursion keeps a group together on {tokens:?}"));
                    }
                    if parts.len() != logs.len() {
                        return Err(format!("early stop returned {} parts on {tokens:?}", parts.len()));
                    }
                }
            }
        }
    }
    if checked > 10_000 && fired > 1_000 {
        Ok((checked, fired))
    } else {
        Err(format!("too few fixtures: checked {checked}, fired {fired}"))
    }
}
