//! Train-then-match benchmark runs and scaling measurements.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use strata_core::preprocess::Preprocessor;
use strata_core::train::{TrainOptions, TrainStats};
use strata_core::{match_or_insert, rebuild_index, train_lines, NodeId, ParseModel, TopicConfig};

use crate::error::{EvalError, Result};
use crate::loghub::LabeledCorpus;
use crate::metrics::grouping_accuracy;

/// One benchmark row. `throughput_logs_per_second` is always
/// `total_logs / (train_seconds + match_seconds)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub dataset: String,
    pub grouping_accuracy: f64,
    pub total_logs: u64,
    pub train_seconds: f64,
    pub match_seconds: f64,
    pub throughput_logs_per_second: f64,
}

impl BenchReport {
    pub fn new(dataset: impl Into<String>, ga: f64, total_logs: u64, train: f64, matching: f64) -> Self {
        let elapsed = train + matching;
        Self {
            dataset: dataset.into(),
            grouping_accuracy: ga,
            total_logs,
            train_seconds: train,
            match_seconds: matching,
            throughput_logs_per_second: if elapsed > 0.0 { total_logs as f64 / elapsed } else { f64::INFINITY },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    /// Score groups at this saturation threshold instead of at the leaves.
    pub threshold: Option<f64>,
    pub workers: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { threshold: None, workers: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: BenchReport,
    /// GA of the groups clustering assigned during training, before any
    /// matching.
    pub assignment_accuracy: f64,
    /// Node each line was matched to (`None` for lines without tokens).
    pub matched: Vec<Option<NodeId>>,
    /// Model after matching, including temporary nodes.
    pub model: ParseModel,
    pub stats: TrainStats,
}

impl BenchOutcome {
    /// GA of the matched groups re-read at `threshold`.
    pub fn accuracy_at(&self, threshold: f64, truth: &[String]) -> Result<f64> {
        let predicted = at_threshold(&self.model, &self.matched, threshold)?;
        grouping_accuracy(&predicted, truth)
    }
}

fn at_threshold(model: &ParseModel, nodes: &[Option<NodeId>], threshold: f64) -> Result<Vec<Option<NodeId>>> {
    nodes
        .iter()
        .map(|n| match n {
            Some(id) => Ok(Some(model.ancestor_at_threshold(*id, threshold)?)),
            None => Ok(None),
        })
        .collect()
}

/// Train on every line of `corpus`, then match every line against the result,
/// inserting lines that find no template. Timing covers preprocessing,
/// training and matching.
pub fn run_benchmark(
    dataset: &str,
    corpus: &LabeledCorpus,
    config: &TopicConfig,
    options: BenchOptions,
) -> Result<BenchOutcome> {
    if let Some(t) = options.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(EvalError::InvalidInput(format!("threshold {t} is outside [0, 1]")));
        }
    }
    let train_options = TrainOptions {
        workers: options.workers,
        ..Default::default()
    };
    let start = Instant::now();
    let trained = train_lines(dataset, config, &corpus.lines, train_options)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (model, matched) = match_all(trained.model, config, &corpus.lines)?;
    let match_seconds = start.elapsed().as_secs_f64();

    let ga = match options.threshold {
        None => grouping_accuracy(&matched, &corpus.labels)?,
        Some(t) => grouping_accuracy(&at_threshold(&model, &matched, t)?, &corpus.labels)?,
    };
    let assignment_accuracy = grouping_accuracy(&trained.assignments, &corpus.labels)?;
    Ok(BenchOutcome {
        report: BenchReport::new(dataset, ga, corpus.len() as u64, train_seconds, match_seconds),
        assignment_accuracy,
        matched,
        model,
        stats: trained.stats,
    })
}

fn match_all<S: AsRef<str>>(
    mut model: ParseModel,
    config: &TopicConfig,
    lines: &[S],
) -> Result<(ParseModel, Vec<Option<NodeId>>)> {
    let pre = Preprocessor::new(config)?;
    let mut index = rebuild_index(&model, config.prefix_k);
    let mut matched = Vec::with_capacity(lines.len());
    for line in lines {
        let node = match pre.encode_line(line.as_ref()) {
            Ok(log) => Some(match_or_insert(&log, &mut model, &mut index)?.node_id),
            Err(strata_core::Error::EmptySequence) => None,
            Err(e) => return Err(e.into()),
        };
        matched.push(node);
    }
    Ok((model, matched))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub n: usize,
    pub seconds: f64,
}

/// Time train+match on the first `n` lines for each size.
pub fn scaling_run(
    corpus: &LabeledCorpus,
    sizes: &[usize],
    config: &TopicConfig,
    workers: usize,
) -> Result<Vec<ScalePoint>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidInput("sizes must be strictly ascending".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n > corpus.len()) {
        return Err(EvalError::InvalidInput(format!(
            "size {n} is outside 1..={}",
            corpus.len()
        )));
    }
    let options = TrainOptions {
        workers,
        ..Default::default()
    };
    sizes
        .iter()
        .map(|&n| {
            let lines = &corpus.lines[..n];
            let start = Instant::now();
            let trained = train_lines("scaling", config, lines, options)?;
            match_all(trained.model, config, lines)?;
            Ok(ScalePoint {
                n,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Least-squares slope of `ln seconds` against `ln n`. `None` with fewer than
/// two distinct sizes or a non-positive time.
pub fn loglog_slope(points: &[ScalePoint]) -> Option<f64> {
    if points.iter().any(|p| p.n == 0 || p.seconds <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.seconds.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
