//! Seeded synthetic corpora with known ground truth.

use std::fmt::Write;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::loghub::LabeledCorpus;

#[derive(Clone, Copy)]
enum Slot {
    Lit(&'static str),
    /// HDFS block id, e.g. `blk_-1608999687919862906`.
    Block,
    /// Dotted quad with port.
    Endpoint,
    Ip,
    Int(u64),
    Pick(&'static [&'static str]),
    Hex,
    Uuid,
}

use Slot::*;

const USERS: &[&str] = &["root", "hdfs", "yarn", "mapred", "alice", "bob"];
const QUEUES: &[&str] = &["default", "etl", "adhoc"];

fn templates() -> Vec<(u32, Vec<Slot>)> {
    vec![
        (40, vec![Lit("Receiving block "), Block, Lit(" src: /"), Endpoint, Lit(" dest: /"), Endpoint]),
        (40, vec![Lit("PacketResponder "), Int(3), Lit(" for block "), Block, Lit(" terminating")]),
        (40, vec![Lit("Received block "), Block, Lit(" of size "), Int(67108864), Lit(" from /"), Ip]),
        (40, vec![
            Lit("BLOCK* NameSystem.addStoredBlock: blockMap updated: "), Endpoint,
            Lit(" is added to "), Block, Lit(" size "), Int(67108864),
        ]),
        (15, vec![
            Lit("BLOCK* NameSystem.allocateBlock: /user/"), Pick(USERS),
            Lit("/rand/_temporary/_task_"), Int(1_000_000), Lit("_m_"), Int(10_000),
            Lit("_0/part-"), Int(10_000), Lit(". "), Block,
        ]),
        (12, vec![Lit("Verification succeeded for "), Block]),
        (12, vec![Lit("Deleting block "), Block, Lit(" file /mnt/hadoop/dfs/data/current/subdir"), Int(64), Lit("/"), Block]),
        (10, vec![Lit("Served block "), Block, Lit(" to /"), Ip]),
        (6, vec![Lit("Got exception while serving "), Block, Lit(" to /"), Ip, Lit(":")]),
        (4, vec![Lit("writeBlock "), Block, Lit(" received exception java.io.IOException: Could not read from stream")]),
        (10, vec![Lit("BLOCK* NameSystem.delete: "), Block, Lit(" is added to invalidSet of "), Endpoint]),
        (4, vec![Lit("BLOCK* ask "), Endpoint, Lit(" to replicate "), Block, Lit(" to datanode(s) "), Endpoint]),
        (4, vec![Lit("Starting thread to transfer block "), Block, Lit(" to "), Endpoint]),
        (3, vec![Lit("Receiving empty packet for block "), Block]),
        (3, vec![Lit("Exception in receiveBlock for block "), Block, Lit(" java.io.IOException: Connection reset by peer")]),
        (3, vec![
            Lit("Changing block file offset of block "), Block, Lit(" from "), Int(1 << 26),
            Lit(" to "), Int(1 << 26), Lit(" meta file offset to "), Int(1 << 20),
        ]),
        (3, vec![Lit("Transmitted block "), Block, Lit(" to /"), Endpoint]),
        (2, vec![Lit("Adding an already existing block "), Block]),
        (2, vec![Lit("Reopen Block "), Block]),
        (6, vec![
            Lit("Container "), Uuid, Lit(" for user "), Pick(USERS), Lit(" in queue "),
            Pick(QUEUES), Lit(" transitioned from NEW to ALLOCATED"),
        ]),
        (4, vec![Lit("Task attempt_"), Int(1_000_000), Lit("_m_"), Int(1000), Lit(" done in "), Int(5000), Lit(" ms")]),
        (3, vec![Lit("Memory usage of ProcessTree "), Int(100_000), Lit(" for container-id "), Uuid, Lit(": "), Int(1024), Lit(" MB of 1 GB physical memory used")]),
        (2, vec![Lit("Connection from "), Endpoint, Lit(" closed, session 0x"), Hex]),
        (2, vec![Lit("Address change detected. Old: "), Ip, Lit(" New: "), Ip]),
    ]
}

fn render(slots: &[Slot], rng: &mut ChaCha8Rng, out: &mut String) {
    for slot in slots {
        match *slot {
            Lit(s) => out.push_str(s),
            Block => {
                let v: i64 = rng.gen();
                let _ = write!(out, "blk_{v}");
            }
            Endpoint => {
                let _ = write!(out, "10.{}.{}.{}:{}", rng.gen_range(0..4), rng.gen_range(0..256), rng.gen_range(1..255), rng.gen_range(1024..65536));
            }
            Ip => {
                let _ = write!(out, "10.{}.{}.{}", rng.gen_range(0..4), rng.gen_range(0..256), rng.gen_range(1..255));
            }
            Int(max) => {
                let _ = write!(out, "{}", rng.gen_range(0..max));
            }
            Pick(words) => out.push_str(words.choose(rng).expect("nonempty")),
            Hex => {
                let _ = write!(out, "{:x}", rng.gen::<u32>());
            }
            Uuid => {
                let b: u128 = rng.gen();
                let _ = write!(
                    out,
                    "{:08x}-{:04x}-{:04x}-{:04x}-{:012x}",
                    (b >> 96) as u32,
                    (b >> 80) as u16,
                    (b >> 64) as u16,
                    (b >> 48) as u16,
                    b & 0xffff_ffff_ffff
                );
            }
        }
    }
}

/// `n` HDFS/YARN-style lines over a fixed set of 24 templates with skewed
/// frequencies. Labels are `E1`..`E24`. Identical `(n, seed)` give identical
/// corpora, and a shorter corpus is a prefix of a longer one.
pub fn hdfs_like(n: usize, seed: u64) -> LabeledCorpus {
    let templates = templates();
    let pick = WeightedIndex::new(templates.iter().map(|(w, _)| *w)).expect("positive weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let t = pick.sample(&mut rng);
        let mut line = String::with_capacity(96);
        render(&templates[t].1, &mut rng, &mut line);
        lines.push(line);
        labels.push(format!("E{}", t + 1));
    }
    LabeledCorpus { lines, labels }
}

/// Number of templates behind [`hdfs_like`].
pub fn hdfs_like_template_count() -> usize {
    templates().len()
}

/// Android power-manager style lock lines:
/// `{release|acquire} lock=<id> {flg|flags}=<hex> tag=<t> name=<n> ws=<w> uid=<u> pid=<p>`.
///
/// Each verb has four families of `per_family` lines; `*` marks a value that
/// is unique per line.
///
/// | label                          | name          | ws     | uid    |
/// |--------------------------------|---------------|--------|--------|
/// | `<verb>/android/*/1000`        | `android`     | `*`    | `1000` |
/// | `<verb>/*/null/1000`           | `*`           | `null` | `1000` |
/// | `<verb>/audioserver/*/1041`    | `audioserver` | `*`    | `1041` |
/// | `<verb>/*/null/1041`           | `*`           | `null` | `1041` |
///
/// Lock ids and pids never repeat. Tags are distinct inside a family and
/// reused across families.
pub fn android_locks(per_family: usize, seed: u64) -> LabeledCorpus {
    const FAMILIES: [(&str, &str, &str); 4] = [
        ("android", "*", "1000"),
        ("*", "null", "1000"),
        ("audioserver", "*", "1041"),
        ("*", "null", "1041"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut labels = Vec::new();
    let mut serial = 0u64;
    for (verb, flag) in [("release", "flg"), ("acquire", "flags")] {
        for (name, ws, uid) in FAMILIES {
            let mut tags: Vec<usize> = (0..per_family).collect();
            tags.shuffle(&mut rng);
            for tag in tags {
                serial += 1;
                let name_text = if name == "*" { format!("com.app.p{serial}") } else { name.to_owned() };
                let ws_text = if ws == "*" { format!("{}", 40_000 + serial) } else { ws.to_owned() };
                lines.push(format!(
                    "{verb} lock={} {flag}=0x{:x} tag=job/{tag} name={name_text} ws={ws_text} uid={uid} pid={}",
                    100_000_000 + serial * 7919,
                    rng.gen_range(1u32..64),
                    20_000 + serial * 3,
                ));
                labels.push(format!("{verb}/{name}/{ws}/{uid}"));
            }
        }
    }
    LabeledCorpus { lines, labels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_prefix_stable() {
        let a = hdfs_like(5000, 7);
        assert_eq!(a, hdfs_like(5000, 7));
        assert_eq!(hdfs_like(200, 7), a.prefix(200));
        assert_ne!(a, hdfs_like(5000, 8));
        assert_eq!(a.template_count(), hdfs_like_template_count());
    }

    #[test]
    fn android_fixture_has_eight_families() {
        let c = android_locks(10, 1);
        assert_eq!(c.len(), 80);
        assert_eq!(c.template_count(), 8);
        assert!(c.lines[0].starts_with("release lock="));
    }
}
