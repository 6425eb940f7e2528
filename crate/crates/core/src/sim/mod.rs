//! Deterministic discrete-event simulation of a broadcast session.
//!
//! The channel is a unit disk: a frame reaches every node within
//! `radio_range` of the sender when it starts, each reception is dropped
//! independently with `loss_probability`, and with the overlap collision
//! model a receiver inside the range of two transmissions whose air times
//! intersect gets neither. There is no MAC layer.
//!
//! Events are ordered by `(time, node, sequence)`. Randomness is split into
//! independent streams (placement/mobility, loss, coefficients, jitter,
//! payloads) derived from the run seed, so a seed fixes the trace exactly.

pub mod config;
pub mod mobility;
pub mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coding::{IngestOutcome, SourcePacket};
use crate::protocol::{Action, Frame, Node, NodeId, NodePhase, Role, TimerTag};
use crate::time::SimTime;

pub use config::{CollisionModel, ConfigError, PolicyKind, SimConfig, Topology};
pub use mobility::{Position, Walker};
pub use trace::{TraceError, TraceKind, TraceLog, TraceMeta, TraceRecord, END_NODE};

/// Independent random stream identifiers.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Stream {
    Mobility = 1,
    Loss = 2,
    Coefficients = 3,
    Jitter = 4,
    Payload = 5,
}

/// SplitMix64 finalizer over `(seed, stream, index)`.
fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Reveal(usize),
    Timer(TimerTagKey),
    TxEnd(usize),
    Sample,
}

/// Orderable copy of a [`TimerTag`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct TimerTagKey {
    kind: u8,
    token: u64,
}

impl From<TimerTag> for TimerTagKey {
    fn from(t: TimerTag) -> Self {
        let kind = match t.kind {
            crate::protocol::TimerKind::Send => 0,
            crate::protocol::TimerKind::Advertise => 1,
            crate::protocol::TimerKind::Sweep => 2,
        };
        TimerTagKey { kind, token: t.token }
    }
}

impl From<TimerTagKey> for TimerTag {
    fn from(k: TimerTagKey) -> Self {
        use crate::protocol::TimerKind;
        let kind = match k.kind {
            0 => TimerKind::Send,
            1 => TimerKind::Advertise,
            _ => TimerKind::Sweep,
        };
        TimerTag { kind, token: k.token }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    time: SimTime,
    node: u32,
    seq: u64,
    kind: EventKind,
}

const SAMPLE_NODE: u32 = u32::MAX;

struct Transmission {
    sender: NodeId,
    end: SimTime,
    frame: Frame,
    /// `(receiver, survives)` for every node in range at start.
    receivers: Vec<(NodeId, bool)>,
}

/// Protocol invariants checked while the simulation runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantReport {
    /// Node entered `Stopped` without full rank.
    pub early_stops: usize,
    /// Transmitted support outside the window selected at send time.
    pub window_violations: usize,
    /// Advertised rank or low index differs from the decoder at emission.
    pub stale_headers: usize,
    /// A relay's rank exceeded the number of packets the source revealed.
    pub rank_conservation: usize,
    /// A pending row's highest index differed from its pivot, or a pivot
    /// vanished without being decoded.
    pub pivot_violations: usize,
    /// Recovered payloads that differ from the source's.
    pub payload_mismatches: usize,
    /// Ingest outcome and rank change disagree.
    pub innovation_mismatches: usize,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        *self == InvariantReport::default()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    /// Run the per-event invariant checks (slower).
    pub check_invariants: bool,
}

pub struct SimOutput {
    pub trace: TraceLog,
    pub invariants: InvariantReport,
    pub end_time: SimTime,
    pub all_stopped: bool,
    pub all_complete: bool,
    pub final_ranks: Vec<usize>,
}

pub struct Simulation {
    cfg: SimConfig,
    opts: SimOptions,
    nodes: Vec<Node>,
    walkers: Vec<Walker>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    loss_rng: ChaCha8Rng,
    source_payloads: Vec<Vec<u8>>,
    revealed: usize,
    transmissions: Vec<Option<Transmission>>,
    active_tx: Vec<usize>,
    trace: Vec<TraceRecord>,
    stopped: usize,
    report: InvariantReport,
    horizon: SimTime,
    source: usize,
}

impl Simulation {
    pub fn new(cfg: SimConfig, opts: SimOptions) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let seed = cfg.run.seed;
        let n = cfg.network.n_nodes;
        let source = cfg.network.source;
        let node_cfg = cfg.node_config();
        let nodes = (0..n)
            .map(|i| {
                let role = if i == source { Role::Source } else { Role::Relay };
                Node::new(
                    i as NodeId,
                    role,
                    node_cfg.clone(),
                    derive_seed(seed, Stream::Coefficients, i as u64),
                    derive_seed(seed, Stream::Jitter, i as u64),
                )
            })
            .collect();
        let walkers = (0..n)
            .map(|i| match cfg.network.topology {
                Topology::Line => Walker::stationary(Position { x: i as f64 * cfg.network.line_spacing, y: 0.0 }),
                Topology::Random => Walker::random_waypoint(
                    (cfg.network.field_width, cfg.network.field_height),
                    (cfg.mobility.speed_min, cfg.mobility.speed_max),
                    cfg.mobility.pause_time,
                    derive_seed(seed, Stream::Mobility, i as u64),
                ),
            })
            .collect();
        let mut payload_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Payload, 0));
        let source_payloads = (0..cfg.session.generation_size)
            .map(|_| (0..cfg.session.payload_size).map(|_| payload_rng.random()).collect())
            .collect();
        Ok(Simulation {
            opts,
            nodes,
            walkers,
            queue: BinaryHeap::new(),
            seq: 0,
            loss_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Loss, 0)),
            source_payloads,
            revealed: 0,
            transmissions: Vec::new(),
            active_tx: Vec::new(),
            trace: Vec::new(),
            stopped: 0,
            report: InvariantReport::default(),
            horizon: SimTime::from_secs_f64(cfg.run.horizon),
            source,
            cfg,
        })
    }

    pub fn source_payloads(&self) -> &[Vec<u8>] {
        &self.source_payloads
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn push(&mut self, time: SimTime, node: u32, kind: EventKind) {
        debug_assert!(time >= self.trace.last().map_or(SimTime::ZERO, |r| r.time), "event in the past");
        self.seq += 1;
        self.queue.push(Reverse(Event { time, node, seq: self.seq, kind }));
    }

    fn record(&mut self, time: SimTime, node: usize, kind: TraceKind, bytes: usize, aux: u32) {
        let n = &self.nodes[node];
        let d = n.decoder();
        self.trace.push(TraceRecord {
            time,
            node: node as u16,
            kind,
            rank: d.rank() as u32,
            low: d.low_index() as u32,
            high: d.high_index() as u32,
            phase: n.phase(),
            bytes: bytes as u32,
            aux,
        });
    }

    fn positions(&mut self, now: SimTime) -> Vec<Position> {
        self.walkers.iter_mut().map(|w| w.position(now)).collect()
    }

    /// Runs to completion: every node stopped, or the horizon.
    pub fn run(mut self) -> SimOutput {
        let interval = Duration::from_secs_f64(self.cfg.run.sample_interval);
        let reveal_period = 1.0 / self.cfg.session.source_rate;
        for j in 1..=self.cfg.session.generation_size {
            let at = SimTime::from_secs_f64((j - 1) as f64 * reveal_period);
            self.push(at, self.source as u32, EventKind::Reveal(j));
        }
        self.push(SimTime::ZERO, SAMPLE_NODE, EventKind::Sample);
        let mut out = Vec::new();
        self.nodes[self.source].start(SimTime::ZERO, &mut out);
        self.apply(SimTime::ZERO, self.source, out);

        let mut now = SimTime::ZERO;
        while let Some(Reverse(ev)) = self.queue.pop() {
            if ev.time > self.horizon {
                break;
            }
            now = ev.time;
            match ev.kind {
                EventKind::Reveal(j) => self.on_reveal(now, j),
                EventKind::Timer(key) => {
                    let node = ev.node as usize;
                    let mut out = Vec::new();
                    self.nodes[node].on_timer(now, key.into(), &mut out);
                    self.apply(now, node, out);
                }
                EventKind::TxEnd(id) => self.on_tx_end(now, id),
                EventKind::Sample => {
                    self.sample(now);
                    self.push(now + interval, SAMPLE_NODE, EventKind::Sample);
                }
            }
            if self.stopped == self.nodes.len() {
                break;
            }
        }
        let end = now;
        if self.trace.last().is_none_or(|r| !(r.kind == TraceKind::Sample && r.time == end)) {
            self.sample(end);
        }
        let complete: Vec<usize> = self.nodes.iter().map(|n| n.rank()).collect();
        let n_complete = complete.iter().filter(|&&r| r == self.cfg.session.generation_size).count();
        self.trace.push(TraceRecord {
            time: end,
            node: END_NODE,
            kind: TraceKind::End,
            rank: n_complete as u32,
            low: 0,
            high: 0,
            phase: if self.stopped == self.nodes.len() { NodePhase::Stopped } else { NodePhase::Active },
            bytes: 0,
            aux: self.stopped as u32,
        });
        self.verify_payloads();

        let cfg = &self.cfg;
        SimOutput {
            trace: TraceLog {
                meta: TraceMeta {
                    n_nodes: cfg.network.n_nodes,
                    generation: cfg.session.generation_size,
                    source: cfg.network.source,
                    payload_size: cfg.session.payload_size,
                    window: cfg.protocol.window,
                    sample_interval_ns: interval.as_nanos() as u64,
                    horizon_ns: self.horizon.as_nanos(),
                    seed: cfg.run.seed,
                    policy: cfg.rate_policy().name().to_string(),
                },
                records: self.trace,
            },
            invariants: self.report,
            end_time: end,
            all_stopped: self.stopped == self.nodes.len(),
            all_complete: n_complete == self.nodes.len(),
            final_ranks: complete,
        }
    }

    fn on_reveal(&mut self, now: SimTime, index: usize) {
        let pkt = SourcePacket { index, payload: self.source_payloads[index - 1].clone() };
        let mut out = Vec::new();
        self.nodes[self.source].reveal(now, &pkt, &mut out).expect("source accepts its own packets");
        self.revealed = index;
        self.record(now, self.source, TraceKind::Reveal, 0, index as u32);
        self.apply(now, self.source, out);
    }

    fn apply(&mut self, now: SimTime, node: usize, actions: Vec<Action>) {
        for action in actions {
            match action {
                Action::Broadcast(frame) => self.transmit(now, node, frame),
                Action::Schedule { at, timer } => self.push(at, node as u32, EventKind::Timer(timer.into())),
                Action::PhaseChange { from, to } => {
                    if to == NodePhase::Stopped {
                        self.stopped += 1;
                        if self.nodes[node].rank() < self.cfg.session.generation_size {
                            self.report.early_stops += 1;
                        }
                    }
                    if from == NodePhase::Stopped {
                        self.stopped -= 1;
                    }
                    self.record(now, node, TraceKind::Phase, 0, from.code() as u32);
                }
            }
        }
    }

    fn transmit(&mut self, now: SimTime, sender: usize, frame: Frame) {
        if self.opts.check_invariants {
            self.check_emission(sender, &frame);
        }
        let bytes = frame.wire_len();
        let overhead = frame.overhead_len();
        let kind = if frame.is_control() { TraceKind::Ctl } else { TraceKind::Tx };
        self.record(now, sender, kind, bytes, overhead as u32);

        let pos = self.positions(now);
        let range = self.cfg.network.radio_range;
        let loss = self.cfg.channel.loss_probability;
        let mut receivers = Vec::new();
        for (i, p) in pos.iter().enumerate() {
            if i != sender && p.distance(pos[sender]) <= range {
                let survives = loss == 0.0 || self.loss_rng.random::<f64>() >= loss;
                receivers.push((i as NodeId, survives));
            }
        }
        let airtime = Duration::from_secs_f64(bytes as f64 * 8.0 / self.cfg.channel.bitrate);
        let end = now + airtime;
        let id = self.transmissions.len();

        if self.cfg.channel.collisions == CollisionModel::Overlap {
            self.active_tx.retain(|&t| self.transmissions[t].as_ref().is_some_and(|tx| tx.end >= now));
            for &other in &self.active_tx {
                let other_tx = self.transmissions[other].as_mut().expect("active");
                for (r, ok) in receivers.iter_mut() {
                    if let Some(slot) = other_tx.receivers.iter_mut().find(|(o, _)| o == r) {
                        slot.1 = false;
                        *ok = false;
                    }
                }
            }
            self.active_tx.push(id);
        }

        self.transmissions.push(Some(Transmission { sender: sender as NodeId, end, frame, receivers }));
        self.push(end, sender as u32, EventKind::TxEnd(id));
    }

    fn on_tx_end(&mut self, now: SimTime, id: usize) {
        let tx = self.transmissions[id].take().expect("each transmission ends once");
        for &(r, ok) in &tx.receivers {
            if !ok {
                continue;
            }
            let r = r as usize;
            let before = self.nodes[r].rank();
            let pivots_before = self.opts.check_invariants.then(|| self.nodes[r].decoder().pending_rows().map(|(p, _)| p).collect::<Vec<_>>());
            let mut out = Vec::new();
            let outcome = self.nodes[r].on_receive(now, &tx.frame, &mut out).expect("same session everywhere");
            let kind = match outcome {
                Some(IngestOutcome::Innovative) => TraceKind::Rx,
                Some(IngestOutcome::Redundant) => TraceKind::Dup,
                None => TraceKind::RxCtl,
            };
            self.record(now, r, kind, 0, tx.sender as u32);
            if let Some(pivots) = pivots_before {
                self.check_reception(r, before, outcome, &pivots);
            }
            self.apply(now, r, out);
        }
    }

    fn sample(&mut self, now: SimTime) {
        let pos = self.positions(now);
        let range = self.cfg.network.radio_range;
        for i in 0..self.nodes.len() {
            let degree = (0..pos.len()).filter(|&j| j != i && pos[i].distance(pos[j]) <= range).count();
            self.record(now, i, TraceKind::Sample, 0, degree as u32);
        }
    }

    fn check_emission(&mut self, sender: usize, frame: &Frame) {
        let node = &self.nodes[sender];
        let d = node.decoder();
        if frame.header.rank != d.rank() || frame.header.low_index != d.low_index() {
            self.report.stale_headers += 1;
        }
        if let Some(pkt) = &frame.body {
            // The window the node would pick now is the one it just used:
            // building a frame changes neither the decoder nor the table.
            let ok = match (node.select_window(), pkt.vector.support()) {
                (Some((lo, hi)), Ok(s)) => s.lowest >= lo && s.highest <= hi,
                _ => false,
            };
            if !ok {
                self.report.window_violations += 1;
            }
        }
    }

    fn check_reception(&mut self, r: usize, before: usize, outcome: Option<IngestOutcome>, pivots_before: &[usize]) {
        let node = &self.nodes[r];
        let d = node.decoder();
        let after = d.rank();
        let innovative = outcome == Some(IngestOutcome::Innovative);
        if innovative != (after == before + 1) || (!innovative && after != before) {
            self.report.innovation_mismatches += 1;
        }
        if node.role() == Role::Relay && after > self.revealed {
            self.report.rank_conservation += 1;
        }
        for (pivot, v) in d.pending_rows() {
            if v.highest() != Some(pivot) {
                self.report.pivot_violations += 1;
            }
        }
        let prefix = d.low_index();
        let still: std::collections::BTreeSet<usize> = d.pending_rows().map(|(p, _)| p).collect();
        for &p in pivots_before {
            if p > prefix && !still.contains(&p) {
                self.report.pivot_violations += 1;
            }
        }
    }

    fn verify_payloads(&mut self) {
        for node in &self.nodes {
            let d = node.decoder();
            for i in 1..=d.low_index() {
                if d.decoded_payload(i) != Some(&self.source_payloads[i - 1][..]) {
                    self.report.payload_mismatches += 1;
                }
            }
        }
    }
}

/// Builds and runs a simulation.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, ConfigError> {
    run_with(cfg, SimOptions::default())
}

pub fn run_with(cfg: &SimConfig, opts: SimOptions) -> Result<SimOutput, ConfigError> {
    Ok(Simulation::new(cfg.clone(), opts)?.run())
}
