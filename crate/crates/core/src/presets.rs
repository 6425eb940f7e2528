//! Named scenarios, mostly at desk scale.
//!
//! Desk scale keeps the node density of 200 nodes on 1100 m × 1100 m:
//! 30 nodes on 430 m × 430 m with a 250 m radio range, D = 200.
//!
//! | preset              | N   | speed (m/s) | D    | K   | policy | notes                       |
//! |---------------------|-----|-------------|------|-----|--------|-----------------------------|
//! | `two-node-smoke`    | 2   | 0           | 20   | 5   | DRAGON | static pair, 100 m apart    |
//! | `line-convergence`  | 10  | 0           | 50   | 5   | DRAGON | static line, loss 0.2       |
//! | `iron-sew`          | 30  | 15          | 200  | 20  | IRON   | decoding over time          |
//! | `iron-nosew`        | 30  | 15          | 200  | 200 | IRON   |                             |
//! | `dragon-sew`        | 30  | 15          | 200  | 20  | DRAGON |                             |
//! | `dragon-nosew`      | 30  | 15          | 200  | 200 | DRAGON |                             |
//! | `mobility-sweep`    | 30  | 15          | 200  | 20  | DRAGON | sweep `mobility.speed`      |
//! | `source-rate-sweep` | 30  | 15          | 200  | 20  | DRAGON | sweep `session.source_rate` |
//! | `mobility-stress`   | 30  | 675         | 200  | 20  | DRAGON | 2.7 radio ranges/s          |
//! | `full-scale`        | 200 | 15          | 1000 | 100 | IRON   | 1100 m field; slow          |

use crate::sim::config::{PolicyKind, SimConfig, Topology};

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Suggested sweep axes, in `--axis` syntax.
    pub axes: &'static [&'static str],
    build: fn() -> SimConfig,
}

impl Preset {
    pub fn config(&self) -> SimConfig {
        (self.build)()
    }
}

fn desk(policy: PolicyKind, sew: bool) -> SimConfig {
    let mut c = SimConfig::default();
    c.protocol.rate_policy = policy;
    c.protocol.window = if sew { c.session.generation_size / 10 } else { c.session.generation_size };
    c
}

fn static_line(n: usize, spacing: f64) -> SimConfig {
    let mut c = SimConfig::default();
    c.network.n_nodes = n;
    c.network.topology = Topology::Line;
    c.network.line_spacing = spacing;
    c.mobility.speed_min = 0.0;
    c.mobility.speed_max = 0.0;
    c
}

fn two_node_smoke() -> SimConfig {
    let mut c = static_line(2, 100.0);
    c.session.generation_size = 20;
    c.session.payload_size = 32;
    c.session.source_rate = 20.0;
    c.protocol.window = 5;
    c.run.horizon = 60.0;
    c
}

fn line_convergence() -> SimConfig {
    let mut c = static_line(10, 200.0);
    c.channel.loss_probability = 0.2;
    c.session.generation_size = 50;
    c.session.payload_size = 32;
    c.protocol.window = 5;
    c.protocol.rate_policy = PolicyKind::Dragon;
    c.protocol.alpha = 0.5;
    c.run.horizon = 600.0;
    c
}

fn mobility_stress() -> SimConfig {
    let mut c = desk(PolicyKind::Dragon, true);
    let speed = 2.7 * c.network.radio_range;
    c.mobility.speed_min = speed;
    c.mobility.speed_max = speed;
    c
}

fn full_scale() -> SimConfig {
    let mut c = desk(PolicyKind::Iron, true);
    c.network.n_nodes = 200;
    c.network.field_width = 1100.0;
    c.network.field_height = 1100.0;
    c.session.generation_size = 1000;
    c.session.payload_size = 1024;
    c.protocol.window = 100;
    c.run.horizon = 1500.0;
    c
}

pub static PRESETS: &[Preset] = &[
    Preset { name: "two-node-smoke", summary: "two static nodes; finishes in well under a second", axes: &[], build: two_node_smoke },
    Preset {
        name: "line-convergence",
        summary: "10-node static line with 20% loss; every node must reach full rank",
        axes: &[],
        build: line_convergence,
    },
    Preset {
        name: "iron-sew",
        summary: "decoding progress over time, IRON with the sliding window",
        axes: &[],
        build: || desk(PolicyKind::Iron, true),
    },
    Preset {
        name: "iron-nosew",
        summary: "decoding progress over time, IRON with plain random coding",
        axes: &[],
        build: || desk(PolicyKind::Iron, false),
    },
    Preset {
        name: "dragon-sew",
        summary: "decoding progress over time, DRAGON with the sliding window",
        axes: &[],
        build: || desk(PolicyKind::Dragon, true),
    },
    Preset {
        name: "dragon-nosew",
        summary: "decoding progress over time, DRAGON with plain random coding",
        axes: &[],
        build: || desk(PolicyKind::Dragon, false),
    },
    Preset {
        name: "mobility-sweep",
        summary: "efficiency and decoding rate against node speed",
        axes: &["mobility.speed=0,5,15,33", "protocol.rate_policy=iron,dragon", "sew=on,off"],
        build: || desk(PolicyKind::Dragon, true),
    },
    Preset {
        name: "source-rate-sweep",
        summary: "efficiency and decoding rate against source rate",
        axes: &["session.source_rate=6,7,8,9,10,11,12", "protocol.rate_policy=iron,dragon", "sew=on,off"],
        build: || desk(PolicyKind::Dragon, true),
    },
    Preset { name: "mobility-stress", summary: "extreme mobility: 2.7 radio ranges per second", axes: &[], build: mobility_stress },
    Preset {
        name: "full-scale",
        summary: "full-size network: 200 nodes, 1100 m field, D = 1000, K = 100",
        axes: &[],
        build: full_scale,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for p in PRESETS {
            p.config().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn names_are_unique() {
        for (i, p) in PRESETS.iter().enumerate() {
            assert!(PRESETS[i + 1..].iter().all(|q| q.name != p.name));
            assert!(std::ptr::eq(find(p.name).unwrap(), p));
        }
    }

    #[test]
    fn sew_pairs_differ_only_in_window() {
        let mut a = find("dragon-sew").unwrap().config();
        let b = find("dragon-nosew").unwrap().config();
        assert!(a.sew_enabled() && !b.sew_enabled());
        a.protocol.window = b.protocol.window;
        assert_eq!(a, b);
    }
}
