//! Transmission-rate policies.
//!
//! Rates are in packets per second. [`RatePolicy::Dragon`] follows the rank
//! gap with neighbors, [`RatePolicy::Iron`] is a static reference where the
//! source sends `M` times faster than everyone else, and
//! [`RatePolicy::Fixed`] gives every node the same rate.

use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RatePolicy {
    Fixed { rate: f64 },
    Iron { base_rate: f64, source_multiplier: f64 },
    Dragon { alpha: f64 },
}

impl RatePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            RatePolicy::Fixed { .. } => "fixed",
            RatePolicy::Iron { .. } => "iron",
            RatePolicy::Dragon { .. } => "dragon",
        }
    }

    /// Rate for a node with the given rank picture.
    ///
    /// `source_floor` is the source's injection rate while it still has
    /// undelivered packets; it only matters for the source under DRAGON.
    pub fn rate(&self, is_source: bool, view: &RankView, source_floor: Option<f64>) -> f64 {
        match *self {
            RatePolicy::Fixed { rate } => rate,
            RatePolicy::Iron { base_rate, source_multiplier } => iron_rate(is_source, base_rate, source_multiplier),
            RatePolicy::Dragon { alpha } => {
                let r = dragon_rate(gap(view), alpha);
                match (is_source, source_floor) {
                    (true, Some(floor)) => r.max(floor),
                    _ => r,
                }
            }
        }
    }
}

/// Own rank and the ranks of live neighbors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankView {
    pub own_rank: usize,
    pub neighbor_ranks: Vec<usize>,
}

/// Largest rank deficit among neighbors divided by the neighbor count.
/// Negative when every neighbor is ahead, zero with no neighbors.
pub fn gap(view: &RankView) -> f64 {
    let own = view.own_rank as i64;
    let Some(max_diff) = view.neighbor_ranks.iter().map(|&r| own - r as i64).max() else {
        return 0.0;
    };
    max_diff as f64 / view.neighbor_ranks.len() as f64
}

/// `alpha * g` while the gap is positive, silence otherwise.
pub fn dragon_rate(g: f64, alpha: f64) -> f64 {
    if g > 0.0 {
        alpha * g
    } else {
        0.0
    }
}

pub fn iron_rate(is_source: bool, base: f64, multiplier: f64) -> f64 {
    if is_source {
        base * multiplier
    } else {
        base
    }
}

/// Inter-packet delay for `rate`; `None` means nothing should be scheduled.
pub fn next_delay(rate: f64) -> Option<Duration> {
    (rate > 0.0 && rate.is_finite()).then(|| Duration::from_secs_f64(1.0 / rate))
}
