//! Random-waypoint motion, evaluated lazily.
//!
//! Each walker picks a uniform destination in the field, travels there in a
//! straight line at a speed drawn uniformly from `[speed_min, speed_max]`,
//! pauses, and repeats. Positions are interpolated at query time, and queries
//! must not go back in time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::time::SimTime;

/// Speeds below this are raised to it so a leg always ends.
const MIN_MOVING_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone)]
pub struct Walker {
    from: Position,
    to: Position,
    depart: f64,
    arrive: f64,
    pause_until: f64,
    speed: (f64, f64),
    pause: f64,
    area: (f64, f64),
    rng: Option<ChaCha8Rng>,
}

impl Walker {
    pub fn stationary(at: Position) -> Self {
        Walker {
            from: at,
            to: at,
            depart: 0.0,
            arrive: 0.0,
            pause_until: f64::INFINITY,
            speed: (0.0, 0.0),
            pause: 0.0,
            area: (0.0, 0.0),
            rng: None,
        }
    }

    pub fn random_waypoint(area: (f64, f64), speed: (f64, f64), pause: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = Position { x: rng.random_range(0.0..=area.0), y: rng.random_range(0.0..=area.1) };
        if speed.1 <= 0.0 {
            return Walker::stationary(start);
        }
        let mut w = Walker { from: start, to: start, depart: 0.0, arrive: 0.0, pause_until: 0.0, speed, pause, area, rng: Some(rng) };
        w.next_leg();
        w
    }

    fn next_leg(&mut self) {
        let rng = self.rng.as_mut().expect("moving walker");
        let dest = Position { x: rng.random_range(0.0..=self.area.0), y: rng.random_range(0.0..=self.area.1) };
        let speed = if self.speed.1 > self.speed.0 { rng.random_range(self.speed.0..=self.speed.1) } else { self.speed.1 };
        let speed = speed.max(MIN_MOVING_SPEED);
        let start = self.pause_until;
        self.from = self.to;
        self.to = dest;
        self.depart = start;
        self.arrive = start + self.from.distance(dest) / speed;
        self.pause_until = self.arrive + self.pause;
    }

    pub fn position(&mut self, now: SimTime) -> Position {
        let t = now.as_secs_f64();
        while t > self.pause_until {
            self.next_leg();
        }
        if t >= self.arrive || self.arrive <= self.depart {
            return self.to;
        }
        let f = ((t - self.depart) / (self.arrive - self.depart)).clamp(0.0, 1.0);
        Position { x: self.from.x + f * (self.to.x - self.from.x), y: self.from.y + f * (self.to.y - self.from.y) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_speed_is_static() {
        let mut w = Walker::random_waypoint((100.0, 100.0), (0.0, 0.0), 0.0, 3);
        let p0 = w.position(SimTime::ZERO);
        assert_eq!(w.position(SimTime::from_secs_f64(1e4)), p0);
    }

    #[test]
    fn displacement_respects_speed_bound() {
        let mut w = Walker::random_waypoint((400.0, 300.0), (2.0, 15.0), 1.0, 9);
        let mut prev = w.position(SimTime::ZERO);
        let dt = 0.37;
        for k in 1..20_000 {
            let p = w.position(SimTime::from_secs_f64(k as f64 * dt));
            assert!(p.distance(prev) <= 15.0 * dt + 1e-6, "step {k}");
            assert!((0.0..=400.0).contains(&p.x) && (0.0..=300.0).contains(&p.y));
            prev = p;
        }
    }

    /// Long-run occupancy touches every cell of a coarse grid, and no cell is
    /// wildly over-represented.
    #[test]
    fn long_run_covers_the_field() {
        const CELLS: usize = 4;
        let mut counts = [[0u32; CELLS]; CELLS];
        let mut total = 0u32;
        for seed in 0..10 {
            let mut w = Walker::random_waypoint((100.0, 100.0), (5.0, 10.0), 0.0, seed);
            for k in 0..10_000 {
                let p = w.position(SimTime::from_secs_f64(k as f64 * 0.5));
                let cx = ((p.x / 25.0) as usize).min(CELLS - 1);
                let cy = ((p.y / 25.0) as usize).min(CELLS - 1);
                counts[cx][cy] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / (CELLS * CELLS) as f64;
        let chi2: f64 = counts.iter().flatten().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(counts.iter().flatten().all(|&c| c > 0));
        // Random waypoint concentrates in the middle, so this is a loose
        // sanity bound rather than a uniformity test: every cell within a
        // factor of four of the mean.
        assert!(counts.iter().flatten().all(|&c| (c as f64) > expected / 4.0 && (c as f64) < expected * 4.0), "{counts:?} chi2={chi2}");
    }
}
