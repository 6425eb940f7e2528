//! Efficiency and real-time-decoding metrics, computed from a trace alone.
//!
//! * `E_cost`: transmissions (data and control) per source packet.
//! * `E_bound`: `N / M_avg_max`, where `M_avg_max` averages, over sample
//!   times, the largest in-range neighbor count of any node.
//! * `E_ref_eff = E_bound / E_cost`.
//! * RTD: decoded prefix over rank, per node.
//!
//! Per-sample rank statistics cover relays only; the source's rank is
//! reported separately as the number of revealed packets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::protocol::NodePhase;
use crate::sim::{TraceKind, TraceLog};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("generation size is zero")]
    ZeroGeneration,
    #[error("resampling cadence {requested_ns} ns is not a positive multiple of the recorded {recorded_ns} ns")]
    Cadence { requested_ns: u64, recorded_ns: u64 },
    #[error("trace has no samples")]
    NoSamples,
}

/// Upper bound on routing efficiency without coding: `6π / (2π + 3√3)`.
pub fn routing_bound() -> f64 {
    use std::f64::consts::PI;
    6.0 * PI / (2.0 * PI + 3.0 * 3f64.sqrt())
}

pub fn e_cost_from(transmissions: usize, generation: usize) -> Result<f64, MetricsError> {
    if generation == 0 {
        return Err(MetricsError::ZeroGeneration);
    }
    Ok(transmissions as f64 / generation as f64)
}

/// `None` when no node ever had a neighbor.
pub fn e_bound_from(n_nodes: usize, m_avg_max: f64) -> Option<f64> {
    (m_avg_max > 0.0).then(|| n_nodes as f64 / m_avg_max)
}

/// `None` when nothing was transmitted or the bound is undefined.
pub fn e_ref_eff_from(e_bound: Option<f64>, e_cost: f64) -> Option<f64> {
    e_bound.filter(|_| e_cost > 0.0).map(|b| b / e_cost)
}

/// Decoded fraction of received information; `0/0` counts as 1.
pub fn rtd(decoded: usize, rank: usize) -> f64 {
    if rank == 0 {
        1.0
    } else {
        decoded as f64 / rank as f64
    }
}

pub fn e_cost(trace: &TraceLog) -> Result<f64, MetricsError> {
    let n = trace.records.iter().filter(|r| r.kind.is_transmission()).count();
    e_cost_from(n, trace.meta.generation)
}

pub fn m_avg_max(trace: &TraceLog) -> Result<f64, MetricsError> {
    let groups = sample_groups(trace, None)?;
    Ok(mean(groups.values().map(|g| g.iter().map(|s| s.degree).max().unwrap_or(0) as f64)).unwrap_or(0.0))
}

pub fn e_bound(n_nodes: usize, trace: &TraceLog) -> Result<Option<f64>, MetricsError> {
    Ok(e_bound_from(n_nodes, m_avg_max(trace)?))
}

pub fn e_ref_eff(trace: &TraceLog) -> Result<Option<f64>, MetricsError> {
    Ok(e_ref_eff_from(e_bound(trace.meta.n_nodes, trace)?, e_cost(trace)?))
}

#[derive(Debug, Clone, Copy)]
struct NodeSample {
    node: usize,
    rank: usize,
    low: usize,
    high: usize,
    degree: usize,
}

fn sample_groups(trace: &TraceLog, cadence_ns: Option<u64>) -> Result<BTreeMap<SimTime, Vec<NodeSample>>, MetricsError> {
    let mut groups: BTreeMap<SimTime, Vec<NodeSample>> = BTreeMap::new();
    for r in trace.records.iter().filter(|r| r.kind == TraceKind::Sample) {
        groups.entry(r.time).or_default().push(NodeSample {
            node: r.node as usize,
            rank: r.rank as usize,
            low: r.low as usize,
            high: r.high as usize,
            degree: r.aux as usize,
        });
    }
    let last = groups.keys().next_back().copied().ok_or(MetricsError::NoSamples)?;
    if let Some(c) = cadence_ns {
        groups.retain(|t, _| t.as_nanos() % c == 0 || *t == last);
    }
    Ok(groups)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub time: SimTime,
    pub avg_rank: f64,
    pub min_rank: usize,
    /// Highest index a relay can encode: its highest pending pivot, or its
    /// decoded prefix when nothing is pending.
    pub avg_high: f64,
    pub min_high: usize,
    pub source_rank: usize,
    /// Mean RTD over relays with nonzero rank; `None` if there are none.
    pub avg_rtd: Option<f64>,
    pub max_degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub n_nodes: usize,
    pub generation: usize,
    pub window: usize,
    pub policy: String,
    pub seed: u64,
    pub sample_interval_s: f64,
    pub resampled: bool,
    pub end_time_s: f64,
    pub completion_time_s: Option<f64>,
    pub all_complete: bool,
    pub all_stopped: bool,
    pub transmissions: usize,
    pub data_transmissions: usize,
    pub control_transmissions: usize,
    pub total_bytes: u64,
    pub overhead_bytes: u64,
    pub e_cost: f64,
    pub e_cost_data: f64,
    pub m_avg_max: f64,
    pub e_bound: Option<f64>,
    pub e_ref_eff: Option<f64>,
    pub e_ref_eff_data: Option<f64>,
    /// Time-averaged RTD over the middle 80% of the run.
    pub rtd_mid80: Option<f64>,
    /// Time-averaged `avg_high - avg_rank` over the same span.
    pub high_gap_mid80: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub samples: Vec<SamplePoint>,
    pub summary: RunSummary,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "\"none\"".to_string(), fmt_f)
}

impl RunSummary {
    /// Flat `key = value` text (valid TOML), one metric per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# channel: {}\n", crate::sim::config::CHANNEL_NOTE);
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("n_nodes", self.n_nodes.to_string());
        kv("generation", self.generation.to_string());
        kv("window", self.window.to_string());
        kv("policy", format!("\"{}\"", self.policy));
        kv("seed", self.seed.to_string());
        kv("sample_interval_s", fmt_f(self.sample_interval_s));
        kv("resampled", self.resampled.to_string());
        kv("end_time_s", fmt_f(self.end_time_s));
        kv("completion_time_s", fmt_opt(self.completion_time_s));
        kv("all_complete", self.all_complete.to_string());
        kv("all_stopped", self.all_stopped.to_string());
        kv("transmissions", self.transmissions.to_string());
        kv("data_transmissions", self.data_transmissions.to_string());
        kv("control_transmissions", self.control_transmissions.to_string());
        kv("total_bytes", self.total_bytes.to_string());
        kv("overhead_bytes", self.overhead_bytes.to_string());
        kv("e_cost", fmt_f(self.e_cost));
        kv("e_cost_data", fmt_f(self.e_cost_data));
        kv("m_avg_max", fmt_f(self.m_avg_max));
        kv("e_bound", fmt_opt(self.e_bound));
        kv("e_ref_eff", fmt_opt(self.e_ref_eff));
        kv("e_ref_eff_data", fmt_opt(self.e_ref_eff_data));
        kv("rtd_mid80", fmt_opt(self.rtd_mid80));
        kv("high_gap_mid80", fmt_opt(self.high_gap_mid80));
        kv("routing_bound", fmt_f(routing_bound()));
        s
    }
}

impl MetricsSeries {
    pub fn from_trace(trace: &TraceLog) -> Result<Self, MetricsError> {
        Self::compute(trace, None)
    }

    /// Recomputes using only samples at multiples of `cadence_ns` (plus the
    /// final one). The result is flagged as resampled when the cadence
    /// differs from the recorded one.
    pub fn resampled(trace: &TraceLog, cadence_ns: u64) -> Result<Self, MetricsError> {
        let recorded = trace.meta.sample_interval_ns;
        if cadence_ns == 0 || !cadence_ns.is_multiple_of(recorded) {
            return Err(MetricsError::Cadence { requested_ns: cadence_ns, recorded_ns: recorded });
        }
        Self::compute(trace, (cadence_ns != recorded).then_some(cadence_ns))
    }

    fn compute(trace: &TraceLog, cadence_ns: Option<u64>) -> Result<Self, MetricsError> {
        let meta = &trace.meta;
        let d = meta.generation;
        let groups = sample_groups(trace, cadence_ns)?;

        let mut samples = Vec::with_capacity(groups.len());
        for (&time, group) in &groups {
            let relays: Vec<&NodeSample> = group.iter().filter(|s| s.node != meta.source || group.len() == 1).collect();
            let high_of = |s: &NodeSample| s.high.max(s.low);
            let rtds = relays.iter().filter(|s| s.rank > 0).map(|s| rtd(s.low, s.rank));
            samples.push(SamplePoint {
                time,
                avg_rank: mean(relays.iter().map(|s| s.rank as f64)).unwrap_or(0.0),
                min_rank: relays.iter().map(|s| s.rank).min().unwrap_or(0),
                avg_high: mean(relays.iter().map(|s| high_of(s) as f64)).unwrap_or(0.0),
                min_high: relays.iter().map(|s| high_of(s)).min().unwrap_or(0),
                source_rank: group.iter().find(|s| s.node == meta.source).map_or(0, |s| s.rank),
                avg_rtd: mean(rtds),
                max_degree: group.iter().map(|s| s.degree).max().unwrap_or(0),
            });
        }

        let mut data_tx = 0usize;
        let mut ctl_tx = 0usize;
        let mut total_bytes = 0u64;
        let mut overhead_bytes = 0u64;
        let mut ranks = vec![0usize; meta.n_nodes];
        let mut full = 0usize;
        let mut completion = None;
        let mut end = None;
        for r in &trace.records {
            match r.kind {
                TraceKind::Tx => data_tx += 1,
                TraceKind::Ctl => ctl_tx += 1,
                TraceKind::End => end = Some(r),
                _ => {}
            }
            if r.kind.is_transmission() {
                total_bytes += r.bytes as u64;
                overhead_bytes += r.aux as u64;
            }
            if r.kind != TraceKind::End {
                let n = r.node as usize;
                let rank = r.rank as usize;
                if rank == d && ranks[n] < d {
                    full += 1;
                    if full == meta.n_nodes && completion.is_none() {
                        completion = Some(r.time.as_secs_f64());
                    }
                }
                ranks[n] = ranks[n].max(rank);
            }
        }
        let end_time = end.map_or_else(|| trace.records.last().map_or(SimTime::ZERO, |r| r.time), |r| r.time);
        let n_transmissions = data_tx + ctl_tx;

        let m_avg_max = mean(samples.iter().map(|s| s.max_degree as f64)).unwrap_or(0.0);
        let e_cost = e_cost_from(n_transmissions, d)?;
        let e_cost_data = e_cost_from(data_tx, d)?;
        let e_bound = e_bound_from(meta.n_nodes, m_avg_max);

        let t_end = end_time.as_secs_f64();
        let mid: Vec<&SamplePoint> = samples
            .iter()
            .filter(|s| {
                let t = s.time.as_secs_f64();
                t >= 0.1 * t_end && t <= 0.9 * t_end
            })
            .collect();

        let summary = RunSummary {
            n_nodes: meta.n_nodes,
            generation: d,
            window: meta.window,
            policy: meta.policy.clone(),
            seed: meta.seed,
            sample_interval_s: cadence_ns.unwrap_or(meta.sample_interval_ns) as f64 * 1e-9,
            resampled: cadence_ns.is_some(),
            end_time_s: t_end,
            completion_time_s: completion,
            all_complete: end.is_some_and(|e| e.rank as usize == meta.n_nodes),
            all_stopped: end.is_some_and(|e| e.aux as usize == meta.n_nodes && e.phase == NodePhase::Stopped),
            transmissions: n_transmissions,
            data_transmissions: data_tx,
            control_transmissions: ctl_tx,
            total_bytes,
            overhead_bytes,
            e_cost,
            e_cost_data,
            m_avg_max,
            e_bound,
            e_ref_eff: e_ref_eff_from(e_bound, e_cost),
            e_ref_eff_data: e_ref_eff_from(e_bound, e_cost_data),
            rtd_mid80: mean(mid.iter().filter_map(|s| s.avg_rtd)),
            high_gap_mid80: mean(mid.iter().map(|s| s.avg_high - s.avg_rank)),
        };
        Ok(MetricsSeries { samples, summary })
    }

    pub const CSV_COLUMNS: [&'static str; 8] =
        ["time_s", "avg_rank", "min_rank", "avg_high", "min_high", "source_rank", "avg_rtd", "max_degree"];

    /// Time series as CSV with one header row; an undefined RTD is empty.
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::CSV_COLUMNS)?;
        for s in &self.samples {
            wr.write_record([
                fmt_f(s.time.as_secs_f64()),
                fmt_f(s.avg_rank),
                s.min_rank.to_string(),
                fmt_f(s.avg_high),
                s.min_high.to_string(),
                s.source_rank.to_string(),
                s.avg_rtd.map(fmt_f).unwrap_or_default(),
                s.max_degree.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{TraceMeta, TraceRecord, END_NODE};

    #[test]
    fn scalar_examples() {
        assert_eq!(e_cost_from(3000, 1000).unwrap(), 3.0);
        assert_eq!(e_cost_from(0, 1000).unwrap(), 0.0);
        assert_eq!(e_cost_from(5, 0), Err(MetricsError::ZeroGeneration));
        assert_eq!(e_bound_from(30, 6.0), Some(5.0));
        assert_eq!(e_bound_from(30, 14.0), Some(30.0 / 14.0));
        assert_eq!(e_bound_from(30, 0.0), None);
        assert_eq!(e_ref_eff_from(Some(5.0), 10.0), Some(0.5));
        assert_eq!(e_ref_eff_from(Some(2.0), 2.0), Some(1.0));
        assert_eq!(e_ref_eff_from(Some(2.0), 0.0), None);
        assert_eq!(rtd(80, 100), 0.8);
        assert_eq!(rtd(0, 0), 1.0);
        assert_eq!(rtd(200, 200), 1.0);
    }

    #[test]
    fn routing_bound_value() {
        assert!((routing_bound() - 1.6420).abs() < 1e-4, "{}", routing_bound());
    }

    fn meta(n: usize, d: usize) -> TraceMeta {
        TraceMeta {
            n_nodes: n,
            generation: d,
            source: 0,
            payload_size: 1,
            window: d,
            sample_interval_ns: 1_000_000_000,
            horizon_ns: 100_000_000_000,
            seed: 0,
            policy: "fixed".into(),
        }
    }

    fn rec(t: u64, node: u16, kind: TraceKind, rank: u32, low: u32, aux: u32) -> TraceRecord {
        TraceRecord { time: SimTime(t * 1_000_000_000), node, kind, rank, low, high: 0, phase: NodePhase::Active, bytes: 10, aux }
    }

    #[test]
    fn single_node_network() {
        let d = 5u32;
        let mut records: Vec<TraceRecord> = (1..=d).map(|i| rec(0, 0, TraceKind::Tx, i, i, 4)).collect();
        records.push(rec(0, 0, TraceKind::Sample, d, d, 0));
        records.push(TraceRecord { node: END_NODE, aux: 1, rank: 1, phase: NodePhase::Stopped, ..rec(0, 0, TraceKind::End, 1, 0, 1) });
        let trace = TraceLog { meta: meta(1, d as usize), records };
        assert_eq!(e_cost(&trace).unwrap(), 1.0);
        // Nobody ever has a neighbor: bound undefined.
        assert_eq!(e_bound(1, &trace).unwrap(), None);
        let m = MetricsSeries::from_trace(&trace).unwrap();
        assert!(m.summary.all_complete && m.summary.all_stopped);
        assert_eq!(m.summary.total_bytes, 50);
        assert_eq!(m.summary.overhead_bytes, 20);
    }

    #[test]
    fn neighbor_bound_from_samples() {
        // Two cliques of 15 at every sample: max degree 14.
        let mut records = Vec::new();
        for t in 0..3 {
            for n in 0..30u16 {
                records.push(rec(t, n, TraceKind::Sample, 0, 0, 14));
            }
        }
        records.push(TraceRecord { node: END_NODE, ..rec(2, 0, TraceKind::End, 0, 0, 0) });
        let trace = TraceLog { meta: meta(30, 10), records };
        assert_eq!(m_avg_max(&trace).unwrap(), 14.0);
        assert_eq!(e_bound(30, &trace).unwrap(), Some(30.0 / 14.0));
    }

    #[test]
    fn complete_graph_bound() {
        let n = 6u16;
        let mut records = Vec::new();
        for node in 0..n {
            records.push(rec(0, node, TraceKind::Sample, 0, 0, (n - 1) as u32));
        }
        records.push(TraceRecord { node: END_NODE, ..rec(0, 0, TraceKind::End, 0, 0, 0) });
        let trace = TraceLog { meta: meta(n as usize, 4), records };
        assert_eq!(e_bound(n as usize, &trace).unwrap(), Some(6.0 / 5.0));
    }

    #[test]
    fn rtd_average_skips_empty_relays_and_source() {
        let records = vec![
            rec(0, 0, TraceKind::Sample, 10, 10, 2),
            rec(0, 1, TraceKind::Sample, 0, 0, 2),
            rec(0, 2, TraceKind::Sample, 10, 5, 2),
            rec(0, 3, TraceKind::Sample, 4, 4, 2),
            TraceRecord { node: END_NODE, ..rec(0, 0, TraceKind::End, 0, 0, 0) },
        ];
        let trace = TraceLog { meta: meta(4, 10), records };
        let m = MetricsSeries::from_trace(&trace).unwrap();
        let s = &m.samples[0];
        assert_eq!(s.avg_rtd, Some(0.75));
        assert_eq!(s.source_rank, 10);
        assert_eq!(s.min_rank, 0);
        assert!((s.avg_rank - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn resampling_is_flagged() {
        let mut records = Vec::new();
        for t in 0..5 {
            records.push(rec(t, 0, TraceKind::Sample, 0, 0, t as u32));
        }
        records.push(TraceRecord { node: END_NODE, ..rec(4, 0, TraceKind::End, 0, 0, 0) });
        let trace = TraceLog { meta: meta(1, 2), records };
        let m = MetricsSeries::resampled(&trace, 2_000_000_000).unwrap();
        assert!(m.summary.resampled);
        assert_eq!(m.samples.len(), 3);
        assert!(!MetricsSeries::resampled(&trace, 1_000_000_000).unwrap().summary.resampled);
        assert!(MetricsSeries::resampled(&trace, 1_500_000_000).is_err());
    }
}
