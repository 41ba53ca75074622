//! `strata`: train, match, query and benchmark log template models, or run
//! the ingestion service.

use std::fs;
use std::io::{self, BufRead, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use strata_core::model::{deserialize, serialize};
use strata_core::preprocess::Preprocessor;
use strata_core::train::TrainOptions;
use strata_core::{display_template, match_log, match_or_insert, rebuild_index, train_lines, ParseModel, TopicConfig};
use strata_eval::{load_loghub, loglog_slope, run_benchmark, scaling_run, BenchOptions};
use strata_service::{parse_topic_config, ServiceConfig};

const DEFAULT_SWEEP: [f64; 4] = [0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Parser)]
#[command(name = "strata", version, about = "Hierarchical log template extraction")]
struct Cli {
    /// One JSON object per output line instead of tab-separated text.
    #[arg(long, global = true)]
    json: bool,

    /// RNG seed for clustering; overrides the topic configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Engine {
    /// Topic configuration (TOML). Defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for preprocessing and training. Defaults to every
    /// core; 1 to 5 is usually enough.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from a log file (one raw line per log, `-` for stdin).
    Train {
        logfile: PathBuf,
        /// Where to write the model.
        #[arg(short, long, value_name = "MODEL")]
        output: PathBuf,
        /// Topic name recorded in the model.
        #[arg(long, default_value = "default")]
        topic: String,
        #[command(flatten)]
        engine: Engine,
    },
    /// Match every line of a log file: node id, saturation, matched flag and
    /// template, one output line per input line.
    Match {
        /// Log file, `-` for stdin.
        logfile: PathBuf,
        /// Model to match against.
        #[arg(short, long, value_name = "MODEL")]
        model: PathBuf,
        /// Insert unmatched lines as temporary templates.
        #[arg(long)]
        insert_unmatched: bool,
        /// Write the model, including inserted templates, here.
        #[arg(short, long, value_name = "MODEL", requires = "insert_unmatched")]
        output: Option<PathBuf>,
        #[command(flatten)]
        engine: Engine,
    },
    /// Templates at a precision threshold, largest first.
    Query {
        /// Model to read.
        #[arg(short, long, value_name = "MODEL")]
        model: PathBuf,
        /// Saturation threshold in [0, 1].
        #[arg(short, long, value_parser = parse_threshold, default_value = "1")]
        threshold: f64,
    },
    /// Train and match a LogHub structured CSV and report grouping accuracy
    /// and throughput.
    Bench {
        /// `*.log_structured.csv` files with `Content` and `EventId` columns.
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Also report accuracy at these thresholds (default 0.3,0.5,0.7,0.9).
        #[arg(long, value_delimiter = ',', value_parser = parse_threshold, num_args = 0..)]
        threshold_sweep: Option<Vec<f64>>,
        /// Time train+match on these prefix sizes and fit the log-log slope.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sizes: Vec<usize>,
        /// Also write the report rows to this CSV file.
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
        #[command(flatten)]
        engine: Engine,
    },
    /// Run the HTTP service.
    Serve {
        /// Service configuration (TOML): listen address, data_dir, topics.
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("{t} is outside [0, 1]"))
    }
}

/// An error in the invocation itself (bad path, mismatched files): exit 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let label = if use_color() { "\x1b[1;31merror\x1b[0m" } else { "error" };
            eprintln!("{label}: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").map_or(true, |v| v.is_empty()) && io::stderr().is_terminal()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let out = io::stdout().lock();
    let mut out = BufWriter::new(out);
    match cli.command {
        Command::Train { logfile, output, topic, engine } => {
            let config = topic_config(&engine, cli.seed)?;
            let lines = read_lines(&logfile)?;
            let trained = train_lines(&topic, &config, &lines, train_options(&engine))?;
            fs::write(&output, serialize(&trained.model)).with_context(|| format!("writing {}", output.display()))?;
            let s = trained.stats;
            #[derive(Serialize)]
            struct Summary<'a> {
                model: &'a Path,
                lines: u64,
                skipped: u64,
                unique: usize,
                groups: usize,
                nodes: usize,
            }
            let summary = Summary {
                model: &output,
                lines: s.lines,
                skipped: s.skipped,
                unique: s.unique,
                groups: s.groups,
                nodes: s.nodes,
            };
            emit(&mut out, cli.json, &summary, || {
                format!(
                    "model\t{}\nlines\t{}\nskipped\t{}\nunique\t{}\ngroups\t{}\nnodes\t{}",
                    output.display(),
                    s.lines,
                    s.skipped,
                    s.unique,
                    s.groups,
                    s.nodes
                )
            })?;
        }
        Command::Match { logfile, model, insert_unmatched, output, engine } => {
            let config = topic_config(&engine, cli.seed)?;
            let mut model = read_model(&model)?;
            check_fingerprint(&model, &config)?;
            let pre = Preprocessor::new(&config)?;
            let mut index = rebuild_index(&model, config.prefix_k);
            #[derive(Serialize)]
            struct Row {
                line: usize,
                node_id: Option<u64>,
                saturation: Option<f64>,
                matched: bool,
                template: Option<String>,
            }
            for (i, line) in read_lines(&logfile)?.iter().enumerate() {
                let found = match pre.encode_line(line) {
                    Ok(log) if insert_unmatched => Some(match_or_insert(&log, &mut model, &mut index)?),
                    Ok(log) => match_log(&log, &index),
                    Err(strata_core::Error::EmptySequence) => None,
                    Err(e) => return Err(e.into()),
                };
                let row = match found {
                    Some(r) => Row {
                        line: i + 1,
                        node_id: Some(r.node_id.0),
                        saturation: Some(r.saturation),
                        matched: r.matched,
                        template: Some(display_template(&model.node(r.node_id)?.template)),
                    },
                    None => Row { line: i + 1, node_id: None, saturation: None, matched: false, template: None },
                };
                emit(&mut out, cli.json, &row, || {
                    format!(
                        "{}\t{}\t{}\t{}",
                        row.node_id.map_or("-".into(), |n| n.to_string()),
                        row.saturation.map_or("-".into(), |s| format!("{s:.6}")),
                        row.matched,
                        row.template.as_deref().unwrap_or("")
                    )
                })?;
            }
            if let Some(path) = output {
                fs::write(&path, serialize(&model)).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Query { model, threshold } => {
            let model = read_model(&model)?;
            if !cli.json {
                writeln!(out, "log_count\tsaturation\tnode_id\ttemplate")?;
            }
            for row in model.templates_at(threshold)? {
                emit(&mut out, cli.json, &row, || {
                    format!("{}\t{:.6}\t{}\t{}", row.log_count, row.saturation, row.node_id, row.display_text)
                })?;
            }
        }
        Command::Bench { csv, threshold_sweep, sizes, summary, engine } => {
            if csv.is_empty() {
                return Err(usage("bench needs at least one structured CSV file"));
            }
            let config = topic_config(&engine, cli.seed)?;
            let workers = train_options(&engine).workers;
            let sweep = threshold_sweep.map(|t| if t.is_empty() { DEFAULT_SWEEP.to_vec() } else { t });
            let mut summary_rows = Vec::new();
            for path in &csv {
                if !path.is_file() {
                    return Err(usage(format!("{}: no such file", path.display())));
                }
                let corpus = load_loghub(path)?;
                let name = dataset_name(path);
                let outcome = run_benchmark(&name, &corpus, &config, BenchOptions { threshold: None, workers })?;
                emit(&mut out, cli.json, &outcome.report, || report_line(&outcome.report, None))?;
                summary_rows.push((outcome.report.clone(), None));
                for &t in sweep.iter().flatten() {
                    let mut r = outcome.report.clone();
                    r.grouping_accuracy = outcome.accuracy_at(t, &corpus.labels)?;
                    #[derive(Serialize)]
                    struct Swept<'a> {
                        threshold: f64,
                        #[serde(flatten)]
                        report: &'a strata_eval::BenchReport,
                    }
                    emit(&mut out, cli.json, &Swept { threshold: t, report: &r }, || report_line(&r, Some(t)))?;
                    summary_rows.push((r, Some(t)));
                }
                if !sizes.is_empty() {
                    let points = scaling_run(&corpus, &sizes, &config, workers).map_err(|e| usage(e.to_string()))?;
                    for p in &points {
                        emit(&mut out, cli.json, p, || format!("scale\t{name}\tn={}\tseconds={:.6}", p.n, p.seconds))?;
                    }
                    if let Some(slope) = loglog_slope(&points) {
                        #[derive(Serialize)]
                        struct Slope<'a> {
                            dataset: &'a str,
                            loglog_slope: f64,
                        }
                        emit(&mut out, cli.json, &Slope { dataset: &name, loglog_slope: slope }, || {
                            format!("slope\t{name}\t{slope:.4}")
                        })?;
                    }
                }
            }
            if let Some(path) = summary {
                write_summary(&path, &summary_rows)?;
            }
        }
        Command::Serve { config } => {
            if !config.is_file() {
                return Err(usage(format!("{}: no such file", config.display())));
            }
            let config = ServiceConfig::load(&config)?;
            tracing_subscriber::fmt()
                .with_writer(io::stderr)
                .with_ansi(use_color())
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(strata_service::serve(config))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn emit<T: Serialize>(out: &mut impl Write, json: bool, value: &T, text: impl FnOnce() -> String) -> anyhow::Result<()> {
    if json {
        serde_json::to_writer(&mut *out, value)?;
        writeln!(out)?;
    } else {
        writeln!(out, "{}", text())?;
    }
    Ok(())
}

fn report_line(r: &strata_eval::BenchReport, threshold: Option<f64>) -> String {
    let at = threshold.map_or("leaves".to_owned(), |t| format!("threshold={t}"));
    format!(
        "{}\t{at}\tgrouping_accuracy={:.4}\ttotal_logs={}\ttrain_seconds={:.4}\tmatch_seconds={:.4}\tthroughput_logs_per_second={:.0}",
        r.dataset, r.grouping_accuracy, r.total_logs, r.train_seconds, r.match_seconds, r.throughput_logs_per_second
    )
}

fn write_summary(path: &Path, rows: &[(strata_eval::BenchReport, Option<f64>)]) -> anyhow::Result<()> {
    let mut f = BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "dataset,threshold,grouping_accuracy,total_logs,train_seconds,match_seconds,throughput_logs_per_second")?;
    for (r, t) in rows {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            r.dataset,
            t.map_or(String::new(), |t| t.to_string()),
            r.grouping_accuracy,
            r.total_logs,
            r.train_seconds,
            r.match_seconds,
            r.throughput_logs_per_second
        )?;
    }
    f.flush()?;
    Ok(())
}

/// `Apache_2k.log_structured.csv` → `Apache_2k`.
fn dataset_name(path: &Path) -> String {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    file.split(".log_structured").next().unwrap_or(&file).trim_end_matches(".csv").to_owned()
}

fn topic_config(engine: &Engine, seed: Option<u64>) -> anyhow::Result<TopicConfig> {
    let mut config = match &engine.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            parse_topic_config(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => TopicConfig::default(),
    };
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    Ok(config)
}

fn train_options(engine: &Engine) -> TrainOptions {
    let workers = engine
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    TrainOptions { workers: workers.max(1), ..TrainOptions::default() }
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        let f = fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        Box::new(io::BufReader::new(f))
    };
    let mut lines = Vec::new();
    for line in reader.split(b'\n') {
        let mut bytes = line?;
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
        lines.push(String::from_utf8_lossy(&bytes).into_owned());
    }
    Ok(lines)
}

fn read_model(path: &Path) -> anyhow::Result<ParseModel> {
    let bytes = fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    deserialize(&bytes).with_context(|| format!("reading model {}", path.display()))
}

fn check_fingerprint(model: &ParseModel, config: &TopicConfig) -> anyhow::Result<()> {
    if model.config_fingerprint == config.fingerprint() {
        Ok(())
    } else {
        Err(usage(
            "the model was trained with a different tokenizer, variable patterns or prefix_k; pass the same --config",
        ))
    }
}
