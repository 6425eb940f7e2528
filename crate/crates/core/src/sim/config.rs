//! Scenario configuration.
//!
//! Configs are TOML with one table per concern. Every key has a default (the
//! desk-scale scenario), unknown keys are rejected, and [`SimConfig::validate`]
//! reports every offending field at once.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::Field;
use crate::protocol::NodeConfig;
use crate::rate::RatePolicy;

/// Stated in every results file: the radio model is deliberately simple.
pub const CHANNEL_NOTE: &str = "unit disk + independent loss + optional overlap collisions (no 802.11 MAC)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldIssue>),
    #[error("could not parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override `{0}` is not of the form section.key=value")]
    Override(String),
}

impl ConfigError {
    pub fn issues(&self) -> &[FieldIssue] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Uniform initial placement, random-waypoint motion.
    Random,
    /// Static chain along the x axis, `line_spacing` apart; node 0 first.
    Line,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollisionModel {
    Off,
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Fixed,
    Iron,
    Dragon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_nodes: usize,
    pub field_width: f64,
    pub field_height: f64,
    pub radio_range: f64,
    pub topology: Topology,
    pub line_spacing: f64,
    pub source: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_nodes: 30,
            field_width: 430.0,
            field_height: 430.0,
            radio_range: 250.0,
            topology: Topology::Random,
            line_spacing: 200.0,
            source: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilityConfig {
    /// m/s
    pub speed_min: f64,
    /// m/s
    pub speed_max: f64,
    /// s
    pub pause_time: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig { speed_min: 15.0, speed_max: 15.0, pause_time: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub loss_probability: f64,
    pub collisions: CollisionModel,
    /// bit/s
    pub bitrate: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { loss_probability: 0.0, collisions: CollisionModel::Off, bitrate: 2.0e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Field order, 2 or 256.
    pub field: u32,
    pub generation_size: usize,
    /// bytes
    pub payload_size: usize,
    /// Source injection rate, packets/s.
    pub source_rate: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { field: 2, generation_size: 200, payload_size: 256, source_rate: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Encoding window width K; equal to the generation size means no window.
    pub window: usize,
    /// Neighbor entry lifetime, s.
    pub lifetime: f64,
    pub timer_jitter: f64,
    pub rate_policy: PolicyKind,
    pub alpha: f64,
    pub iron_base_rate: f64,
    pub iron_multiplier: f64,
    pub fixed_rate: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            window: 20,
            lifetime: 2.0,
            timer_jitter: 0.1,
            rate_policy: PolicyKind::Dragon,
            alpha: 0.5,
            iron_base_rate: 1.0,
            iron_multiplier: 8.867,
            fixed_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// s
    pub horizon: f64,
    pub seed: u64,
    /// Metric sampling period, s.
    pub sample_interval: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { horizon: 300.0, seed: 1, sample_interval: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub mobility: MobilityConfig,
    pub channel: ChannelConfig,
    pub session: SessionConfig,
    pub protocol: ProtocolConfig,
    pub run: RunConfig,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `section.key=value` overrides on top of this config. Values
    /// are parsed as TOML literals, falling back to bare strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut doc = toml::Table::try_from(self).expect("config serializes");
        for raw in overrides {
            let raw = raw.as_ref();
            let (path, value) = raw.split_once('=').ok_or_else(|| ConfigError::Override(raw.into()))?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| ConfigError::Override(raw.into()))?;
            let value = parse_literal(value.trim());
            let table = doc
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| ConfigError::Override(raw.into()))?;
            table.insert(key.to_string(), value);
        }
        let cfg: SimConfig = doc.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn field(&self) -> Field {
        Field::from_order(self.session.field).unwrap_or(Field::Gf2)
    }

    pub fn rate_policy(&self) -> RatePolicy {
        let p = &self.protocol;
        match p.rate_policy {
            PolicyKind::Fixed => RatePolicy::Fixed { rate: p.fixed_rate },
            PolicyKind::Iron => RatePolicy::Iron { base_rate: p.iron_base_rate, source_multiplier: p.iron_multiplier },
            PolicyKind::Dragon => RatePolicy::Dragon { alpha: p.alpha },
        }
    }

    pub fn node_config(&self) -> NodeConfig {
        NodeConfig {
            field: self.field(),
            generation: self.session.generation_size,
            payload_size: self.session.payload_size,
            window: self.protocol.window,
            lifetime: Duration::from_secs_f64(self.protocol.lifetime),
            rate: self.rate_policy(),
            source_rate: self.session.source_rate,
            timer_jitter: self.protocol.timer_jitter,
        }
    }

    pub fn is_static(&self) -> bool {
        self.network.topology == Topology::Line || self.mobility.speed_max == 0.0
    }

    /// Windowing is off when the window covers the whole generation.
    pub fn sew_enabled(&self) -> bool {
        self.protocol.window < self.session.generation_size
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| issues.push(FieldIssue { field: field.into(), message });
        let positive = |v: f64| v.is_finite() && v > 0.0;

        let n = &self.network;
        if n.n_nodes == 0 || n.n_nodes > u16::MAX as usize {
            bad("network.n_nodes", format!("must be in 1..={}, got {}", u16::MAX, n.n_nodes));
        }
        if n.source >= n.n_nodes.max(1) {
            bad("network.source", format!("must name a node below n_nodes, got {}", n.source));
        }
        if !positive(n.radio_range) {
            bad("network.radio_range", format!("must be > 0, got {}", n.radio_range));
        }
        match n.topology {
            Topology::Random => {
                if !positive(n.field_width) {
                    bad("network.field_width", format!("must be > 0, got {}", n.field_width));
                }
                if !positive(n.field_height) {
                    bad("network.field_height", format!("must be > 0, got {}", n.field_height));
                }
            }
            Topology::Line => {
                if !positive(n.line_spacing) {
                    bad("network.line_spacing", format!("must be > 0, got {}", n.line_spacing));
                }
            }
        }

        let m = &self.mobility;
        if !(m.speed_min.is_finite() && m.speed_min >= 0.0) {
            bad("mobility.speed_min", format!("must be >= 0, got {}", m.speed_min));
        }
        if !(m.speed_max.is_finite() && m.speed_max >= m.speed_min) {
            bad("mobility.speed_max", format!("must be >= speed_min, got {}", m.speed_max));
        }
        if !(m.pause_time.is_finite() && m.pause_time >= 0.0) {
            bad("mobility.pause_time", format!("must be >= 0, got {}", m.pause_time));
        }

        let c = &self.channel;
        if !(0.0..1.0).contains(&c.loss_probability) {
            bad("channel.loss_probability", format!("must be in [0, 1), got {}", c.loss_probability));
        }
        if !positive(c.bitrate) {
            bad("channel.bitrate", format!("must be > 0, got {}", c.bitrate));
        }

        let s = &self.session;
        if Field::from_order(s.field).is_err() {
            bad("session.field", format!("must be 2 or 256, got {}", s.field));
        }
        if s.generation_size == 0 || s.generation_size > u16::MAX as usize {
            bad("session.generation_size", format!("must be in 1..={}, got {}", u16::MAX, s.generation_size));
        }
        if !positive(s.source_rate) {
            bad("session.source_rate", format!("must be > 0, got {}", s.source_rate));
        }

        let p = &self.protocol;
        if p.window == 0 || p.window > s.generation_size {
            bad("protocol.window", format!("must be in 1..=generation_size, got {}", p.window));
        }
        if !positive(p.lifetime) || p.lifetime > 4.0e6 {
            bad("protocol.lifetime", format!("must be in (0, 4e6] s, got {}", p.lifetime));
        }
        if !(0.0..1.0).contains(&p.timer_jitter) {
            bad("protocol.timer_jitter", format!("must be in [0, 1), got {}", p.timer_jitter));
        }
        match p.rate_policy {
            PolicyKind::Fixed if !positive(p.fixed_rate) => bad("protocol.fixed_rate", format!("must be > 0, got {}", p.fixed_rate)),
            PolicyKind::Iron => {
                if !positive(p.iron_base_rate) {
                    bad("protocol.iron_base_rate", format!("must be > 0, got {}", p.iron_base_rate));
                }
                if !(p.iron_multiplier.is_finite() && p.iron_multiplier >= 1.0) {
                    bad("protocol.iron_multiplier", format!("must be >= 1, got {}", p.iron_multiplier));
                }
            }
            PolicyKind::Dragon if !positive(p.alpha) => bad("protocol.alpha", format!("must be > 0, got {}", p.alpha)),
            _ => {}
        }

        let r = &self.run;
        if !positive(r.horizon) {
            bad("run.horizon", format!("must be > 0, got {}", r.horizon));
        }
        if !positive(r.sample_interval) {
            bad("run.sample_interval", format!("must be > 0, got {}", r.sample_interval));
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    /// TOML of the full config, preceded by comments with derived values.
    pub fn to_resolved_toml(&self) -> String {
        let range = self.network.radio_range;
        let mut out = String::new();
        out.push_str("# resolved dragoncast scenario\n");
        match self.field().polynomial() {
            Some(poly) => out.push_str(&format!("# field: {} reduction polynomial 0x{poly:X}\n", self.field())),
            None => out.push_str(&format!("# field: {}\n", self.field())),
        }
        out.push_str(&format!(
            "# speed: {}..{} m/s = {:.4}..{:.4} radio ranges/s\n",
            self.mobility.speed_min,
            self.mobility.speed_max,
            self.mobility.speed_min / range,
            self.mobility.speed_max / range
        ));
        out.push_str(&format!("# windowing: {}\n", if self.sew_enabled() { "on" } else { "off (window = generation)" }));
        out.push_str(&format!("# channel: {CHANNEL_NOTE}\n\n"));
        out.push_str(&toml::to_string(self).expect("config serializes"));
        out
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
