//! Network-coded broadcast for mobile ad hoc networks: finite-field coding
//! with a sliding encoding window, DRAGON/IRON rate control, a sans-IO
//! protocol state machine, a deterministic discrete-event simulator and the
//! efficiency/decodability metrics computed from its traces.

pub mod coding;
pub mod galois;
pub mod metrics;
pub mod presets;
pub mod protocol;
pub mod rate;
pub mod sim;
pub mod time;

pub use coding::{CodedPacket, DecoderState, EncodeError, EncodingVector, IngestOutcome, PacketSupport, SourcePacket};
pub use galois::{Field, FieldElement};
pub use metrics::{MetricsSeries, RunSummary};
pub use protocol::{Frame, Node, NodeConfig, NodeId, NodePhase, PiggybackHeader, Role};
pub use rate::{RankView, RatePolicy};
pub use sim::{SimConfig, SimOptions, SimOutput, Simulation, TraceLog};
pub use time::SimTime;
