//! Position-wise token statistics of a cluster, and the two scores computed
//! from them: positional similarity and saturation.

use std::collections::{HashMap, HashSet};

use nohash_hasher::BuildNoHashHasher;

use crate::error::{Error, Result};
use crate::hash::WILDCARD_HASH;
use crate::types::{Cell, EncodedLog, Template};

type FreqMap = HashMap<u64, TokenFreq, BuildNoHashHasher<u64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TokenFreq {
    count: u64,
    // Index (into the slice the stats were built from) of the first log that
    // carries this token; used to recover the token text.
    first: usize,
}

/// Multiplicity-weighted token frequencies for every position of a cluster.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    freq: Vec<FreqMap>,
    size: u64,
    unique: usize,
}

/// How a position is treated by the saturation score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionClass {
    /// One distinct token.
    Constant,
    /// Every distinct log has its own token, with at least three logs.
    FullyVariable,
    Unresolved,
}

impl ClusterStats {
    /// Statistics over arbitrary logs; duplicates are allowed and counted by
    /// multiplicity.
    pub fn from_logs(logs: &[EncodedLog]) -> Result<Self> {
        let members: Vec<usize> = (0..logs.len()).collect();
        let mut stats = Self::from_members(logs, &members)?;
        let distinct: HashSet<&[u64]> = logs.iter().map(|l| l.hashes.as_slice()).collect();
        stats.unique = distinct.len();
        Ok(stats)
    }

    /// Statistics over `logs[members]`, which must be pairwise distinct.
    pub(crate) fn from_members(logs: &[EncodedLog], members: &[usize]) -> Result<Self> {
        let &first = members
            .first()
            .ok_or_else(|| Error::InvalidInput("cluster statistics need at least one log".into()))?;
        let m = logs[first].len();
        let mut freq: Vec<FreqMap> = (0..m).map(|_| FreqMap::default()).collect();
        let mut size = 0u64;
        for &idx in members {
            let log = &logs[idx];
            if log.len() != m {
                return Err(Error::Invariant(format!(
                    "cluster mixes token lengths {m} and {}",
                    log.len()
                )));
            }
            if log.count == 0 {
                return Err(Error::Invariant("log multiplicity must be positive".into()));
            }
            size += log.count;
            for (pos, &h) in freq.iter_mut().zip(&log.hashes) {
                pos.entry(h)
                    .and_modify(|f| f.count += log.count)
                    .or_insert(TokenFreq {
                        count: log.count,
                        first: idx,
                    });
            }
        }
        Ok(Self {
            freq,
            size,
            unique: members.len(),
        })
    }

    /// Number of token positions.
    pub fn positions(&self) -> usize {
        self.freq.len()
    }

    /// Total multiplicity.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Number of distinct logs.
    pub fn unique(&self) -> usize {
        self.unique
    }

    /// Distinct tokens at `pos`.
    pub fn distinct(&self, pos: usize) -> usize {
        self.freq[pos].len()
    }

    /// Summed multiplicity of token `hash` at `pos`.
    pub fn frequency(&self, pos: usize, hash: u64) -> u64 {
        self.freq[pos].get(&hash).map_or(0, |f| f.count)
    }

    pub fn classify(&self, pos: usize) -> PositionClass {
        let n = self.distinct(pos);
        if n == 1 {
            PositionClass::Constant
        } else if n == self.unique && self.unique >= 3 {
            PositionClass::FullyVariable
        } else {
            PositionClass::Unresolved
        }
    }

    pub fn classes(&self) -> Vec<PositionClass> {
        (0..self.positions()).map(|i| self.classify(i)).collect()
    }

    pub fn unresolved_count(&self) -> usize {
        (0..self.positions())
            .filter(|&i| self.classify(i) == PositionClass::Unresolved)
            .count()
    }

    /// Per-position importance for [`positional_similarity`]: `1/(n_i - 1)`
    /// for varying positions and `2` for constant ones.
    pub fn weights(&self) -> Weights {
        let w: Vec<f64> = self
            .freq
            .iter()
            .map(|f| match f.len() {
                1 => 2.0,
                n => 1.0 / (n as f64 - 1.0),
            })
            .collect();
        let total = w.iter().sum();
        Weights { w, total }
    }
}

/// Precomputed position weights of one cluster.
#[derive(Debug, Clone)]
pub struct Weights {
    w: Vec<f64>,
    total: f64,
}

/// Weighted mean over positions of the log token's relative frequency in the
/// cluster. `1.0` means every token equals the cluster's unanimous token.
pub fn positional_similarity(log: &EncodedLog, stats: &ClusterStats) -> Result<f64> {
    if log.len() != stats.positions() {
        return Err(Error::InvalidInput(format!(
            "log has {} tokens, cluster has {} positions",
            log.len(),
            stats.positions()
        )));
    }
    Ok(similarity_with(&log.hashes, stats, &stats.weights()))
}

#[inline]
pub(crate) fn similarity_with(hashes: &[u64], stats: &ClusterStats, weights: &Weights) -> f64 {
    let size = stats.size as f64;
    let mut acc = 0.0;
    for ((freq, &w), h) in stats.freq.iter().zip(&weights.w).zip(hashes) {
        if let Some(f) = freq.get(h) {
            acc += w * (f.count as f64 / size);
        }
    }
    acc / weights.total
}

/// How completely the cluster's positions are resolved into constants or
/// variables, in `[0, 1]`.
///
/// Constant and fully-variable positions count as resolved (`f_c` is their
/// share). Each unresolved position contributes `(ln n_i - 1) / ln n`,
/// clamped to `[0, 1]`, and the smallest of these (`f_v`) is blended in with
/// confidence `p_c = 2^-(unresolved - 1)`:
/// `s = (f_v * p_c + 1 - p_c) * f_c`.
pub fn saturation(stats: &ClusterStats) -> f64 {
    let m = stats.positions();
    if m == 0 {
        return 1.0;
    }
    let ln_size = (stats.size as f64).ln();
    let mut resolved = 0usize;
    let mut variability = f64::INFINITY;
    for pos in 0..m {
        match stats.classify(pos) {
            PositionClass::Constant | PositionClass::FullyVariable => resolved += 1,
            PositionClass::Unresolved => {
                let n_i = stats.distinct(pos) as f64;
                let fv = if ln_size > 0.0 {
                    ((n_i.ln() - 1.0) / ln_size).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                variability = variability.min(fv);
            }
        }
    }
    let constant_share = resolved as f64 / m as f64;
    if resolved == m {
        return constant_share;
    }
    let unresolved = (m - resolved) as i32;
    let confidence = 0.5f64.powi(unresolved - 1);
    (variability * confidence + (1.0 - confidence)) * constant_share
}

/// Template of a cluster: the shared token where a position is constant,
/// `*` elsewhere. `logs` must be the slice the stats were built from.
pub fn template_of(stats: &ClusterStats, logs: &[EncodedLog]) -> Template {
    let cells = stats
        .freq
        .iter()
        .enumerate()
        .map(|(pos, freq)| {
            if freq.len() != 1 {
                return Cell::Wildcard;
            }
            let (&hash, f) = freq.iter().next().expect("one entry");
            if hash == WILDCARD_HASH {
                Cell::Wildcard
            } else {
                Cell::Literal {
                    text: logs[f.first].tokens[pos].clone(),
                    hash,
                }
            }
        })
        .collect();
    Template { cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(tokens: &[&str]) -> EncodedLog {
        EncodedLog::from_tokens(tokens.iter().copied())
    }

    fn stats(logs: &[EncodedLog]) -> ClusterStats {
        ClusterStats::from_logs(logs).unwrap()
    }

    #[test]
    fn build_stats_examples() {
        let single = [log(&["a", "b", "c"]).with_count(3)];
        let s = stats(&single);
        assert_eq!(s.size(), 3);
        assert!((0..3).all(|i| s.distinct(i) == 1));

        let s = stats(&[log(&["a", "b"]), log(&["a", "c"])]);
        assert_eq!(s.frequency(0, single[0].hashes[0]), 2);
        assert_eq!(s.distinct(1), 2);
        assert_eq!(s.unique(), 2);
    }

    #[test]
    fn build_stats_rejects_mixed_lengths() {
        let r = ClusterStats::from_logs(&[log(&["a"]), log(&["a", "b"])]);
        assert!(matches!(r, Err(Error::Invariant(_))));
        assert!(ClusterStats::from_logs(&[]).is_err());
    }

    #[test]
    fn deduplicated_stats_match_expanded() {
        let a = log(&["a", "b", "x"]);
        let b = log(&["a", "c", "y"]);
        let expanded = stats(&[a.clone(), b.clone(), a.clone(), a.clone()]);
        let deduped = stats(&[a.clone().with_count(3), b.clone()]);
        assert_eq!(expanded.size(), deduped.size());
        assert_eq!(expanded.unique(), deduped.unique());
        for pos in 0..3 {
            assert_eq!(expanded.distinct(pos), deduped.distinct(pos));
            for l in [&a, &b] {
                assert_eq!(
                    expanded.frequency(pos, l.hashes[pos]),
                    deduped.frequency(pos, l.hashes[pos])
                );
            }
        }
        assert_eq!(saturation(&expanded), saturation(&deduped));
    }

    #[test]
    fn similarity_examples() {
        let only = log(&["a", "b", "c"]);
        let s = stats(&[only.clone()]);
        assert_eq!(positional_similarity(&only, &s).unwrap(), 1.0);

        let s = stats(&[log(&["a", "b", "x"]), log(&["a", "b", "y"])]);
        let sim = positional_similarity(&log(&["a", "b", "x"]), &s).unwrap();
        assert!((sim - 0.9).abs() < 1e-12, "{sim}");
        assert_eq!(positional_similarity(&log(&["q", "r", "s"]), &s).unwrap(), 0.0);
        assert!(positional_similarity(&log(&["a", "b"]), &s).is_err());
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturation(&stats(&[log(&["a", "b"])])), 1.0);

        // One position with three distinct values among three logs.
        let set1 = [
            log(&["UserService", "createUser", "success", "t1"]),
            log(&["UserService", "createUser", "success", "t2"]),
            log(&["UserService", "createUser", "success", "t3"]),
        ];
        assert_eq!(saturation(&stats(&set1)), 1.0);

        let s = stats(&[log(&["a", "b", "x"]), log(&["a", "c", "y"]), log(&["a", "b", "z"])]);
        assert_eq!(
            s.classes(),
            [
                PositionClass::Constant,
                PositionClass::Unresolved,
                PositionClass::FullyVariable
            ]
        );
        assert_eq!(saturation(&s), 0.0);
    }

    #[test]
    fn saturation_blends_variability() {
        // Two unresolved positions, 4 of 6 resolved: p_c = 1/2,
        // f_v = min over unresolved of clamp((ln n_i - 1) / ln n).
        let mut logs = Vec::new();
        for i in 0..20 {
            let a = format!("a{}", i % 10);
            let b = format!("b{}", i % 5);
            logs.push(log(&["k", "k2", "k3", &a, &b, &format!("id{i}")]));
        }
        let s = stats(&logs);
        let n = 20f64;
        let fv_a = ((10f64).ln() - 1.0) / n.ln();
        let fv_b = ((5f64).ln() - 1.0) / n.ln();
        let expected = (fv_a.min(fv_b) * 0.5 + 0.5) * (4.0 / 6.0);
        assert!((saturation(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn template_examples() {
        let only = [log(&["release", "lock", "L1"])];
        assert_eq!(template_of(&stats(&only), &only).raw_text(), "release lock L1");

        let pair = [log(&["release", "lock", "L1"]), log(&["release", "lock", "L2"])];
        assert_eq!(template_of(&stats(&pair), &pair).raw_text(), "release lock *");

        let varied = [log(&["a", "b"]), log(&["c", "d"])];
        assert_eq!(template_of(&stats(&varied), &varied).wildcard_count(), 2);

        // A constant wildcard token stays a wildcard.
        let starred = [log(&["users", "*"])];
        assert!(template_of(&stats(&starred), &starred).cells[1].is_wildcard());
    }
}
