use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use strata_eval::synth::{android_locks, hdfs_like};

fn strata(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_logs(dir: &Path, name: &str, lines: &[String]) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_then_match_matches_every_line() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = hdfs_like(2000, 5).lines;
    lines.push(String::new());
    let logs = write_logs(dir.path(), "hdfs.log", &lines);
    let model = dir.path().join("m.model");

    let out = stdout(&strata(&["train", s(&logs), "-o", s(&model), "--workers", "1"]));
    assert!(out.contains("lines\t2001"), "{out}");
    assert!(out.contains("skipped\t1"), "{out}");

    let out = stdout(&strata(&["match", s(&logs), "-m", s(&model)]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), lines.len());
    for (row, line) in rows.iter().zip(&lines) {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols.len(), 4);
        if line.is_empty() {
            assert_eq!(cols[..3], ["-", "-", "false"]);
        } else {
            assert_eq!(cols[2], "true", "{row}");
        }
    }

    let out = stdout(&strata(&["--json", "match", s(&logs), "-m", s(&model)]));
    let first: serde_json::Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(first["line"], 1);
    assert_eq!(first["matched"], true);
    assert_eq!(out.lines().count(), lines.len());
}

#[test]
fn unmatched_lines_can_be_inserted() {
    let dir = tempfile::tempdir().unwrap();
    let logs = write_logs(dir.path(), "a.log", &["disk full on sda".into(), "disk full on sdb".into()]);
    let other = write_logs(dir.path(), "b.log", &["kernel panic now".into()]);
    let model = dir.path().join("m.model");
    let updated = dir.path().join("m2.model");
    stdout(&strata(&["train", s(&logs), "-o", s(&model)]));

    let out = stdout(&strata(&["match", s(&other), "-m", s(&model)]));
    assert_eq!(out, "-\t-\tfalse\t\n");
    let out = stdout(&strata(&["match", s(&other), "-m", s(&model), "--insert-unmatched", "-o", s(&updated)]));
    assert!(out.ends_with("\tfalse\tkernel panic now\n"), "{out}");
    let out = stdout(&strata(&["match", s(&other), "-m", s(&updated)]));
    assert!(out.contains("\ttrue\tkernel panic now"), "{out}");
}

#[test]
fn query_thresholds_and_range_check() {
    let dir = tempfile::tempdir().unwrap();
    let logs = write_logs(dir.path(), "android.log", &android_locks(50, 1).lines);
    let model = dir.path().join("m.model");
    stdout(&strata(&["train", s(&logs), "-o", s(&model)]));

    let rows = |t: &str| stdout(&strata(&["query", "-m", s(&model), "--threshold", t])).lines().count() - 1;
    assert_eq!(rows("0.05"), 1);
    assert_eq!(rows("0.95"), 8);

    let out = stdout(&strata(&["--json", "query", "-m", s(&model), "-t", "0.95"]));
    let total: u64 = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["log_count"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 400);

    let bad = strata(&["query", "-m", s(&model), "--threshold", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("outside [0, 1]"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.log");
    let out = strata(&["train", s(&missing), "-o", s(&dir.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: "), "NO_COLOR output has no escapes: {stderr}");
    assert_eq!(strata(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(strata(&["query", "-m", s(&missing)]).status.code(), Some(2));

    // A model trained under one tokenization cannot be matched under another.
    let logs = write_logs(dir.path(), "a.log", &["a b".into()]);
    let model = dir.path().join("m.model");
    stdout(&strata(&["train", s(&logs), "-o", s(&model)]));
    let cfg = dir.path().join("k.toml");
    std::fs::write(&cfg, "prefix_k = 1\n").unwrap();
    assert_eq!(strata(&["match", s(&logs), "-m", s(&model), "--config", s(&cfg)]).status.code(), Some(2));

    // Corrupt model files are runtime failures.
    std::fs::write(&model, "{not a model").unwrap();
    assert_eq!(strata(&["query", "-m", s(&model)]).status.code(), Some(1));
}

#[test]
fn training_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let logs = write_logs(dir.path(), "h.log", &hdfs_like(3000, 9).lines);
    let run = |name: &str, seed: &str| {
        let model = dir.path().join(name);
        stdout(&strata(&["--seed", seed, "train", s(&logs), "-o", s(&model)]));
        std::fs::read(model).unwrap()
    };
    assert_eq!(run("a", "42"), run("b", "42"));
}

fn write_structured(dir: &Path) -> PathBuf {
    let corpus = hdfs_like(3000, 4);
    let mut text = String::from("LineId,Content,EventId,EventTemplate\n");
    for (i, (line, label)) in corpus.lines.iter().zip(&corpus.labels).enumerate() {
        text.push_str(&format!("{},\"{}\",{label},{label}\n", i + 1, line.replace('"', "\"\"")));
    }
    let p = dir.join("Synth_2k.log_structured.csv");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn bench_reports_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_structured(dir.path());
    let summary = dir.path().join("summary.csv");
    let out = stdout(&strata(&[
        "bench",
        s(&csv),
        "--threshold-sweep",
        "--sizes",
        "300,3000",
        "--workers",
        "1",
        "--summary",
        s(&summary),
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("Synth_2k\tleaves\tgrouping_accuracy="), "{out}");
    assert_eq!(lines.iter().filter(|l| l.contains("threshold=")).count(), 4);
    assert_eq!(lines.iter().filter(|l| l.starts_with("scale\t")).count(), 2);
    assert!(lines.last().unwrap().starts_with("slope\tSynth_2k\t"));
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 1 + 5);

    let out = stdout(&strata(&["--json", "bench", s(&csv), "--threshold-sweep", "0.5"]));
    let rows: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let r = &rows[0];
    let recomputed = r["total_logs"].as_f64().unwrap() / (r["train_seconds"].as_f64().unwrap() + r["match_seconds"].as_f64().unwrap());
    assert!((r["throughput_logs_per_second"].as_f64().unwrap() - recomputed).abs() < 1e-6 * recomputed);
    assert_eq!(rows[1]["threshold"], 0.5);

    let bad = strata(&["bench", s(&csv), "--sizes", "100,50"]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(strata(&["bench", s(&csv), "--threshold-sweep", "2"]).status.code(), Some(2));
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("service.toml");
    std::fs::write(&config, "listen = \"127.0.0.1:0\"\n[topics.demo]\n").unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_strata"))
        .args(["serve", "--config", s(&config)])
        .env("NO_COLOR", "1")
        .env("RUST_LOG", "info")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut addr = None;
    let mut line = String::new();
    while stderr.read_line(&mut line).unwrap() > 0 {
        if let Some(rest) = line.split("addr=").nth(1) {
            addr = rest.split_whitespace().next().map(str::to_owned);
            break;
        }
        line.clear();
    }
    let addr = addr.expect("server logs its address");
    let request = |req: &str| {
        let mut stream = TcpStream::connect(&addr).unwrap();
        stream.write_all(req.as_bytes()).unwrap();
        let mut resp = String::new();
        stream.read_to_string(&mut resp).unwrap();
        resp
    };
    let health = request("GET /healthz HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    let templates = request("GET /topics/demo/templates?threshold=0.5 HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(health.starts_with("HTTP/1.1 200") && health.ends_with("ok"), "{health}");
    assert!(templates.starts_with("HTTP/1.1 200") && templates.ends_with("[]"), "{templates}");
}
