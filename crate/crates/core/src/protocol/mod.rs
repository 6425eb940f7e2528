//! Per-node broadcast state machine.
//!
//! A [`Node`] never touches a clock or a radio. The driver feeds it frames,
//! timer expiries and (at the source) newly produced source packets, and the
//! node answers with [`Action`]s: frames to broadcast, timers to arm and
//! phase transitions. The simulator is one such driver.
//!
//! Lifecycle: relays start `Idle` and become `Active` on the first frame they
//! hear; the source is `Active` from the start. An `Active` node stops once
//! it and every live neighbor hold full rank, and a `Stopped` node restarts
//! as soon as it hears a header advertising less than full rank. Every
//! non-idle node advertises its rank at least every `lifetime / 2`, either
//! piggybacked on data or in a payload-free control frame, and a node that
//! reaches full rank announces it immediately.

mod neighbors;
pub mod wire;

use std::fmt;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{CodedPacket, CodingError, DecoderState, EncodeError, IngestOutcome, SourcePacket};
use crate::galois::Field;
use crate::rate::{next_delay, RankView, RatePolicy};
use crate::time::SimTime;

pub use neighbors::{NeighborEntry, NeighborTable};

pub type NodeId = u16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiggybackHeader {
    pub sender: NodeId,
    pub rank: usize,
    pub low_index: usize,
    pub lifetime: Duration,
    pub is_control: bool,
}

/// Everything a node puts on the air.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub field: Field,
    pub generation: usize,
    pub header: PiggybackHeader,
    /// `None` for control frames.
    pub body: Option<CodedPacket>,
}

impl Frame {
    pub fn is_control(&self) -> bool {
        self.body.is_none()
    }

    pub fn wire_len(&self) -> usize {
        wire::wire_len(self)
    }

    pub fn overhead_len(&self) -> usize {
        wire::overhead_len(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodePhase {
    Idle,
    Active,
    Stopped,
}

impl NodePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            NodePhase::Idle => "idle",
            NodePhase::Active => "active",
            NodePhase::Stopped => "stopped",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NodePhase::Idle),
            1 => Some(NodePhase::Active),
            2 => Some(NodePhase::Stopped),
            _ => None,
        }
    }
}

impl fmt::Display for NodePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Source,
    Relay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    Send,
    Advertise,
    Sweep,
}

/// Timer handle; a fired timer whose token is no longer current is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimerTag {
    pub kind: TimerKind,
    pub token: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Broadcast(Frame),
    Schedule { at: SimTime, timer: TimerTag },
    PhaseChange { from: NodePhase, to: NodePhase },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("frame for {got_field} / D={got_generation} in a {field} / D={generation} session")]
    Session { field: Field, generation: usize, got_field: Field, got_generation: usize },
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error("only the source can reveal source packets")]
    NotSource,
}

/// Session and protocol parameters shared by all nodes of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub field: Field,
    pub generation: usize,
    pub payload_size: usize,
    /// Encoding-window width `K`; `K = D` disables windowing.
    pub window: usize,
    pub lifetime: Duration,
    pub rate: RatePolicy,
    /// Source injection rate in packets per second.
    pub source_rate: f64,
    /// Relative half-width of the uniform jitter applied to send delays.
    pub timer_jitter: f64,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    at: SimTime,
    token: u64,
}

pub struct Node {
    id: NodeId,
    role: Role,
    cfg: NodeConfig,
    phase: NodePhase,
    decoder: DecoderState,
    neighbors: NeighborTable,
    coeff_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    send: Option<Pending>,
    advert: Option<Pending>,
    sweep: Option<Pending>,
    next_token: u64,
    last_broadcast: Option<SimTime>,
}

impl Node {
    /// `coeff_seed` drives coefficient draws, `jitter_seed` send-delay
    /// jitter; keeping them apart lets either change without perturbing the
    /// other.
    pub fn new(id: NodeId, role: Role, cfg: NodeConfig, coeff_seed: u64, jitter_seed: u64) -> Self {
        let decoder = DecoderState::new(cfg.field, cfg.generation, cfg.payload_size);
        Node {
            id,
            role,
            cfg,
            phase: NodePhase::Idle,
            decoder,
            neighbors: NeighborTable::default(),
            coeff_rng: ChaCha8Rng::seed_from_u64(coeff_seed),
            jitter_rng: ChaCha8Rng::seed_from_u64(jitter_seed),
            send: None,
            advert: None,
            sweep: None,
            next_token: 0,
            last_broadcast: None,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn phase(&self) -> NodePhase {
        self.phase
    }

    pub fn decoder(&self) -> &DecoderState {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut DecoderState {
        &mut self.decoder
    }

    pub fn neighbors(&self) -> &NeighborTable {
        &self.neighbors
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn rank(&self) -> usize {
        self.decoder.rank()
    }

    pub fn pending_send(&self) -> Option<SimTime> {
        self.send.map(|p| p.at)
    }

    pub fn last_broadcast(&self) -> Option<SimTime> {
        self.last_broadcast
    }

    pub fn rank_view(&self) -> RankView {
        RankView { own_rank: self.decoder.rank(), neighbor_ranks: self.neighbors.ranks() }
    }

    /// Rate the node would use right now. The source keeps at least its
    /// injection rate while packets remain to be revealed or some live
    /// neighbor still lacks packets the source holds.
    pub fn current_rate(&self) -> f64 {
        let is_source = self.role == Role::Source;
        let rank = self.decoder.rank();
        let undelivered = rank < self.cfg.generation || !self.neighbors.all_at_least(rank);
        let floor = (is_source && undelivered).then_some(self.cfg.source_rate);
        self.cfg.rate.rate(is_source, &self.rank_view(), floor)
    }

    pub fn header(&self, is_control: bool) -> PiggybackHeader {
        PiggybackHeader {
            sender: self.id,
            rank: self.decoder.rank(),
            low_index: self.decoder.low_index(),
            lifetime: self.cfg.lifetime,
            is_control,
        }
    }

    fn token(&mut self) -> u64 {
        self.next_token += 1;
        self.next_token
    }

    fn set_phase(&mut self, to: NodePhase, out: &mut Vec<Action>) {
        if self.phase != to {
            out.push(Action::PhaseChange { from: self.phase, to });
            self.phase = to;
        }
    }

    /// Activates the source at the start of a session.
    pub fn start(&mut self, now: SimTime, out: &mut Vec<Action>) {
        if self.role == Role::Source && self.phase == NodePhase::Idle {
            self.activate(now, out);
        }
    }

    fn activate(&mut self, now: SimTime, out: &mut Vec<Action>) {
        self.set_phase(NodePhase::Active, out);
        if self.advert.is_none() {
            self.arm_advert(now, out);
        }
        self.reschedule_send(now, out);
    }

    /// Hands the next source packet to the source node.
    pub fn reveal(&mut self, now: SimTime, packet: &SourcePacket, out: &mut Vec<Action>) -> Result<(), ProtocolError> {
        if self.role != Role::Source {
            return Err(ProtocolError::NotSource);
        }
        self.expire_neighbors(now, out);
        let pkt = CodedPacket::systematic(self.cfg.field, self.cfg.generation, packet)?;
        self.decoder.ingest(&pkt)?;
        self.check_termination(out);
        self.reschedule_send(now, out);
        Ok(())
    }

    /// Processes a frame that survived the channel. Returns the decoder
    /// outcome for data frames.
    pub fn on_receive(&mut self, now: SimTime, frame: &Frame, out: &mut Vec<Action>) -> Result<Option<IngestOutcome>, ProtocolError> {
        if frame.header.sender == self.id {
            return Ok(None);
        }
        if frame.field != self.cfg.field || frame.generation != self.cfg.generation {
            return Err(ProtocolError::Session {
                field: self.cfg.field,
                generation: self.cfg.generation,
                got_field: frame.field,
                got_generation: frame.generation,
            });
        }
        self.expire_neighbors(now, out);

        let outcome = match &frame.body {
            Some(pkt) => Some(self.decoder.ingest(pkt)?),
            None => None,
        };

        let h = &frame.header;
        self.neighbors.upsert(NeighborEntry {
            node: h.sender,
            rank: h.rank,
            low_index: h.low_index,
            expires_at: now + h.lifetime,
        });
        self.arm_sweep(out);

        match self.phase {
            NodePhase::Idle => self.activate(now, out),
            NodePhase::Stopped if h.rank < self.cfg.generation => self.activate(now, out),
            _ => {}
        }
        self.check_termination(out);
        self.reschedule_send(now, out);
        // Reaching full rank is acknowledged at once, so senders still
        // serving this node stop without waiting for the periodic beacon.
        if outcome == Some(IngestOutcome::Innovative) && self.decoder.is_complete() {
            self.send_control(now, out);
        }
        Ok(outcome)
    }

    pub fn on_timer(&mut self, now: SimTime, tag: TimerTag, out: &mut Vec<Action>) {
        let slot = match tag.kind {
            TimerKind::Send => &mut self.send,
            TimerKind::Advertise => &mut self.advert,
            TimerKind::Sweep => &mut self.sweep,
        };
        match *slot {
            Some(p) if p.token == tag.token => *slot = None,
            _ => return,
        }
        self.expire_neighbors(now, out);
        match tag.kind {
            TimerKind::Send => self.on_send_timer(now, out),
            TimerKind::Advertise => self.advertise_if_silent(now, out),
            TimerKind::Sweep => self.arm_sweep(out),
        }
    }

    /// Encoding window `[lo, hi]`: starts just past the smallest decoded
    /// prefix among live neighbors, spans at most `K` indices and never
    /// exceeds what this node can encode. `None` when nothing stored fits.
    pub fn select_window(&self) -> Option<(usize, usize)> {
        let lo = 1 + self.neighbors.min_low_index().unwrap_or(0);
        let hi = (lo + self.cfg.window - 1).min(self.decoder.extent());
        (hi >= lo && self.decoder.eligible_count(lo, hi) > 0).then_some((lo, hi))
    }

    /// Builds the next data frame, if there is anything to send.
    pub fn build_data_frame(&mut self) -> Option<(Frame, (usize, usize))> {
        let (lo, hi) = self.select_window()?;
        match self.decoder.encode_window(lo, hi, &mut self.coeff_rng) {
            Ok(pkt) => Some((
                Frame { field: self.cfg.field, generation: self.cfg.generation, header: self.header(false), body: Some(pkt) },
                (lo, hi),
            )),
            Err(EncodeError::NothingToSend) => None,
            Err(e @ EncodeError::InvalidWindow { .. }) => unreachable!("select_window produced {e}"),
        }
    }

    fn on_send_timer(&mut self, now: SimTime, out: &mut Vec<Action>) {
        if self.phase != NodePhase::Active {
            return;
        }
        let Some(delay) = next_delay(self.current_rate()) else {
            return;
        };
        if let Some((frame, _)) = self.build_data_frame() {
            self.broadcast(now, frame, out);
        }
        self.schedule_send(now, delay, out);
    }

    /// Sends a control frame unless something was broadcast within the last
    /// `lifetime / 2`.
    pub fn advertise_if_silent(&mut self, now: SimTime, out: &mut Vec<Action>) {
        if self.phase == NodePhase::Idle {
            return;
        }
        let half = self.cfg.lifetime / 2;
        let quiet = self.last_broadcast.is_none_or(|t| now - t >= half);
        if quiet {
            self.send_control(now, out);
        } else if self.advert.is_none() {
            let at = self.last_broadcast.expect("not quiet") + half;
            self.arm_advert_at(at, out);
        }
    }

    fn send_control(&mut self, now: SimTime, out: &mut Vec<Action>) {
        let frame = Frame { field: self.cfg.field, generation: self.cfg.generation, header: self.header(true), body: None };
        self.broadcast(now, frame, out);
    }

    fn broadcast(&mut self, now: SimTime, frame: Frame, out: &mut Vec<Action>) {
        out.push(Action::Broadcast(frame));
        self.last_broadcast = Some(now);
        self.arm_advert(now, out);
    }

    fn arm_advert(&mut self, now: SimTime, out: &mut Vec<Action>) {
        let at = now + self.cfg.lifetime / 2;
        self.arm_advert_at(at, out);
    }

    fn arm_advert_at(&mut self, at: SimTime, out: &mut Vec<Action>) {
        let token = self.token();
        self.advert = Some(Pending { at, token });
        out.push(Action::Schedule { at, timer: TimerTag { kind: TimerKind::Advertise, token } });
    }

    /// Keeps a sweep armed just after the earliest neighbor expiry.
    fn arm_sweep(&mut self, out: &mut Vec<Action>) {
        let Some(earliest) = self.neighbors.earliest_expiry() else { return };
        let at = SimTime(earliest.0 + 1);
        if self.sweep.is_some_and(|p| p.at <= at) {
            return;
        }
        let token = self.token();
        self.sweep = Some(Pending { at, token });
        out.push(Action::Schedule { at, timer: TimerTag { kind: TimerKind::Sweep, token } });
    }

    fn jittered(&mut self, delay: Duration) -> Duration {
        let j = self.cfg.timer_jitter;
        if j <= 0.0 {
            return delay;
        }
        let factor = 1.0 + self.jitter_rng.random_range(-j..=j);
        delay.mul_f64(factor)
    }

    fn schedule_send(&mut self, now: SimTime, delay: Duration, out: &mut Vec<Action>) {
        let at = now + self.jittered(delay);
        let token = self.token();
        self.send = Some(Pending { at, token });
        out.push(Action::Schedule { at, timer: TimerTag { kind: TimerKind::Send, token } });
    }

    /// Re-evaluates the rate; a pending send only ever moves earlier.
    fn reschedule_send(&mut self, now: SimTime, out: &mut Vec<Action>) {
        if self.phase != NodePhase::Active {
            return;
        }
        let Some(delay) = next_delay(self.current_rate()) else {
            return;
        };
        if self.send.is_some_and(|p| p.at <= now + delay) {
            return;
        }
        self.schedule_send(now, delay, out);
    }

    /// Stops when this node and every live neighbor hold full rank.
    pub fn check_termination(&mut self, out: &mut Vec<Action>) {
        let d = self.cfg.generation;
        if self.phase == NodePhase::Active && self.decoder.rank() == d && self.neighbors.all_at_least(d) {
            self.send = None;
            self.set_phase(NodePhase::Stopped, out);
        }
    }

    /// Removes expired neighbor entries, then re-checks termination and rate.
    pub fn expire_neighbors(&mut self, now: SimTime, out: &mut Vec<Action>) -> Vec<NeighborEntry> {
        let gone = self.neighbors.expire(now);
        if !gone.is_empty() {
            self.check_termination(out);
            self.reschedule_send(now, out);
        }
        gone
    }
}
