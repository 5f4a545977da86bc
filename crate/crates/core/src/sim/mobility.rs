use serde::{Deserialize, Serialize};

use crate::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_us: u64,
    pub x: f64,
    pub y: f64,
}

/// Piecewise-linear position, held constant outside the waypoint range.
pub fn position_at(waypoints: &[Waypoint], t: Instant) -> (f64, f64) {
    let first = waypoints.first().expect("at least one waypoint");
    let t_us = t.as_nanos() as f64 / 1e3;
    if t_us <= first.t_us as f64 {
        return (first.x, first.y);
    }
    let i = waypoints.partition_point(|w| (w.t_us as f64) <= t_us);
    if i == waypoints.len() {
        let last = waypoints[i - 1];
        return (last.x, last.y);
    }
    let (a, b) = (waypoints[i - 1], waypoints[i]);
    let f = (t_us - a.t_us as f64) / (b.t_us - a.t_us) as f64;
    (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
}

pub fn is_static(waypoints: &[Waypoint]) -> bool {
    waypoints.windows(2).all(|w| w[0].x == w[1].x && w[0].y == w[1].y)
}

pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path() -> Vec<Waypoint> {
        vec![Waypoint { t_us: 0, x: 0.0, y: 0.0 }, Waypoint { t_us: 10_000_000, x: 10.0, y: 0.0 }]
    }

    #[test]
    fn interpolates_and_clamps() {
        let p = path();
        assert_eq!(position_at(&p, Instant::ZERO), (0.0, 0.0));
        assert_eq!(position_at(&p, Instant::from_secs(10)), (10.0, 0.0));
        assert_eq!(position_at(&p, Instant::from_secs(5)), (5.0, 0.0));
        assert_eq!(position_at(&p, Instant::from_secs(99)), (10.0, 0.0));
        let late = [Waypoint { t_us: 1_000_000, x: 3.0, y: 4.0 }];
        assert_eq!(position_at(&late, Instant::ZERO), (3.0, 4.0));
        assert_eq!(distance((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert!(!is_static(&p));
        assert!(is_static(&late));
    }
}
