//! Evaluation harness: LogHub-format corpora, grouping accuracy, benchmark
//! and scaling runs, and a synthetic corpus generator.

mod bench;
mod error;
mod loghub;
mod metrics;
pub mod synth;

pub use bench::{
    loglog_slope, run_benchmark, scaling_run, BenchOptions, BenchOutcome, BenchReport, ScalePoint,
};
pub use error::{EvalError, Result};
pub use loghub::{load_loghub, parse_loghub, LabeledCorpus};
pub use metrics::grouping_accuracy;
