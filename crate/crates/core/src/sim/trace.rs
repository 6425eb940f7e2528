//! Line-delimited run trace.
//!
//! ```text
//! # dragoncast-trace v1
//! # n_nodes=30
//! # ... one `# key=value` line per [`TraceMeta`] field
//! time_ns,node,kind,rank,low,high,phase,bytes,aux
//! 0,0,reveal,1,1,0,active,0,1
//! ...
//! 4120000000,65535,end,30,0,0,stopped,0,30
//! ```
//!
//! `low` is the decoded prefix and `high` the highest pending pivot. The
//! meaning of `aux` depends on `kind`:
//!
//! | kind     | record                               | aux                       |
//! |----------|--------------------------------------|---------------------------|
//! | `tx`     | data frame sent                      | overhead bytes            |
//! | `ctl`    | control frame sent                   | overhead bytes            |
//! | `rx`     | innovative data frame received       | sender                    |
//! | `dup`    | non-innovative data frame received   | sender                    |
//! | `rxc`    | control frame received               | sender                    |
//! | `phase`  | phase transition (new phase)         | previous phase code       |
//! | `reveal` | source produced a packet             | source packet index       |
//! | `sample` | periodic snapshot                    | in-range neighbor count   |
//! | `end`    | run finished (node = 65535)          | number of stopped nodes   |
//!
//! For `end`, `rank` holds the number of nodes with full rank. Metrics are a
//! pure function of this file.

use std::fmt::Write as _;
use std::io::{self, Write};

use thiserror::Error;

use crate::protocol::NodePhase;
use crate::time::SimTime;

pub const TRACE_MAGIC: &str = "# dragoncast-trace v1";
pub const TRACE_COLUMNS: &str = "time_ns,node,kind,rank,low,high,phase,bytes,aux";
pub const END_NODE: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Tx,
    Ctl,
    Rx,
    Dup,
    RxCtl,
    Phase,
    Reveal,
    Sample,
    End,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Tx => "tx",
            TraceKind::Ctl => "ctl",
            TraceKind::Rx => "rx",
            TraceKind::Dup => "dup",
            TraceKind::RxCtl => "rxc",
            TraceKind::Phase => "phase",
            TraceKind::Reveal => "reveal",
            TraceKind::Sample => "sample",
            TraceKind::End => "end",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tx" => TraceKind::Tx,
            "ctl" => TraceKind::Ctl,
            "rx" => TraceKind::Rx,
            "dup" => TraceKind::Dup,
            "rxc" => TraceKind::RxCtl,
            "phase" => TraceKind::Phase,
            "reveal" => TraceKind::Reveal,
            "sample" => TraceKind::Sample,
            "end" => TraceKind::End,
            _ => return None,
        })
    }

    pub fn is_transmission(self) -> bool {
        matches!(self, TraceKind::Tx | TraceKind::Ctl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: u16,
    pub kind: TraceKind,
    pub rank: u32,
    pub low: u32,
    pub high: u32,
    pub phase: NodePhase,
    pub bytes: u32,
    pub aux: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceMeta {
    pub n_nodes: usize,
    pub generation: usize,
    pub source: usize,
    pub payload_size: usize,
    pub window: usize,
    pub sample_interval_ns: u64,
    pub horizon_ns: u64,
    pub seed: u64,
    pub policy: String,
}

impl TraceMeta {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n_nodes", self.n_nodes.to_string()),
            ("generation", self.generation.to_string()),
            ("source", self.source.to_string()),
            ("payload_size", self.payload_size.to_string()),
            ("window", self.window.to_string()),
            ("sample_interval_ns", self.sample_interval_ns.to_string()),
            ("horizon_ns", self.horizon_ns.to_string()),
            ("seed", self.seed.to_string()),
            ("policy", self.policy.clone()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLog {
    pub meta: TraceMeta,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

impl TraceLog {
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.records.len() + 16));
        s.push_str(TRACE_MAGIC);
        s.push('\n');
        for (k, v) in self.meta.pairs() {
            let _ = writeln!(s, "# {k}={v}");
        }
        s.push_str(TRACE_COLUMNS);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.time.as_nanos(),
                r.node,
                r.kind.as_str(),
                r.rank,
                r.low,
                r.high,
                r.phase.as_str(),
                r.bytes,
                r.aux
            );
        }
        s
    }

    /// Parses a trace, rejecting anything malformed or missing the final
    /// `end` record. Errors name the first bad line (1-based).
    pub fn parse(text: &str) -> Result<TraceLog, TraceError> {
        let err = |line: usize, message: String| TraceError { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        match lines.next() {
            Some((_, l)) if l == TRACE_MAGIC => {}
            _ => return Err(err(1, format!("expected `{TRACE_MAGIC}`"))),
        }

        let mut meta = std::collections::BTreeMap::new();
        let mut next = lines.next();
        while let Some((n, l)) = next {
            let Some(body) = l.strip_prefix("# ") else { break };
            let (k, v) = body.split_once('=').ok_or_else(|| err(n, format!("bad metadata `{l}`")))?;
            meta.insert(k.to_string(), (n, v.to_string()));
            next = lines.next();
        }
        let header_line = next.map_or(0, |(n, _)| n);
        match next {
            Some((_, l)) if l == TRACE_COLUMNS => {}
            _ => return Err(err(header_line.max(1), "missing column header".into())),
        }

        let num = |key: &str| -> Result<u64, TraceError> {
            let (n, v) = meta.get(key).ok_or_else(|| err(header_line, format!("missing metadata `{key}`")))?;
            v.parse().map_err(|_| err(*n, format!("bad value for `{key}`")))
        };
        let meta = TraceMeta {
            n_nodes: num("n_nodes")? as usize,
            generation: num("generation")? as usize,
            source: num("source")? as usize,
            payload_size: num("payload_size")? as usize,
            window: num("window")? as usize,
            sample_interval_ns: num("sample_interval_ns")?,
            horizon_ns: num("horizon_ns")?,
            seed: num("seed")?,
            policy: meta.get("policy").map(|(_, v)| v.clone()).unwrap_or_default(),
        };
        if meta.sample_interval_ns == 0 {
            return Err(err(header_line, "sample interval must be positive".into()));
        }

        let mut records = Vec::new();
        let mut last_time = 0u64;
        let mut ended = false;
        let mut last_line = header_line;
        for (n, l) in lines {
            last_line = n;
            if ended {
                return Err(err(n, "record after `end`".into()));
            }
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 9 {
                return Err(err(n, format!("expected 9 fields, found {}", f.len())));
            }
            let int = |i: usize| -> Result<u64, TraceError> { f[i].parse().map_err(|_| err(n, format!("bad integer `{}` in column {}", f[i], i + 1))) };
            let small = |i: usize| -> Result<u32, TraceError> { u32::try_from(int(i)?).map_err(|_| err(n, format!("column {} out of range", i + 1))) };
            let time = int(0)?;
            if time < last_time {
                return Err(err(n, "time goes backwards".into()));
            }
            last_time = time;
            let node = u16::try_from(int(1)?).map_err(|_| err(n, "node id out of range".into()))?;
            let kind = TraceKind::parse(f[2]).ok_or_else(|| err(n, format!("unknown kind `{}`", f[2])))?;
            let phase = match f[6] {
                "idle" => NodePhase::Idle,
                "active" => NodePhase::Active,
                "stopped" => NodePhase::Stopped,
                other => return Err(err(n, format!("unknown phase `{other}`"))),
            };
            if kind != TraceKind::End && node as usize >= meta.n_nodes {
                return Err(err(n, format!("node {node} not below n_nodes")));
            }
            ended = kind == TraceKind::End;
            records.push(TraceRecord {
                time: SimTime(time),
                node,
                kind,
                rank: small(3)?,
                low: small(4)?,
                high: small(5)?,
                phase,
                bytes: small(7)?,
                aux: small(8)?,
            });
        }
        if !ended {
            return Err(err(last_line + 1, "trace ends without an `end` record (truncated?)".into()));
        }
        Ok(TraceLog { meta, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_log() -> TraceLog {
        let rec = |t: u64, node: u16, kind, aux| TraceRecord {
            time: SimTime(t),
            node,
            kind,
            rank: 3,
            low: 1,
            high: 5,
            phase: NodePhase::Active,
            bytes: 40,
            aux,
        };
        TraceLog {
            meta: TraceMeta {
                n_nodes: 2,
                generation: 10,
                source: 0,
                payload_size: 8,
                window: 4,
                sample_interval_ns: 1_000_000_000,
                horizon_ns: 9_000_000_000,
                seed: 5,
                policy: "dragon".into(),
            },
            records: vec![rec(0, 0, TraceKind::Tx, 32), rec(5, 1, TraceKind::Rx, 0), rec(9, END_NODE, TraceKind::End, 2)],
        }
    }

    #[test]
    fn text_round_trip() {
        let log = sample_log();
        let text = log.to_text();
        assert!(text.starts_with(TRACE_MAGIC));
        assert_eq!(TraceLog::parse(&text).unwrap(), log);
    }

    #[test]
    fn truncation_is_reported() {
        let text = sample_log().to_text();
        let lines: Vec<&str> = text.lines().collect();
        // Cut inside the last record.
        let mut cut = lines[..lines.len() - 1].join("\n");
        cut.push_str("\n9,65535,en");
        let e = TraceLog::parse(&cut).unwrap_err();
        assert_eq!(e.line, lines.len());
        // Cut at a line boundary: no end record.
        let cut = lines[..lines.len() - 1].join("\n");
        let e = TraceLog::parse(&cut).unwrap_err();
        assert!(e.message.contains("end"), "{e}");
    }

    #[test]
    fn bad_fields_name_the_line() {
        let text = sample_log().to_text().replace("5,1,rx", "5,1,zz");
        let e = TraceLog::parse(&text).unwrap_err();
        assert_eq!(e.line, 13);
        assert!(e.message.contains("zz"));
    }
}
