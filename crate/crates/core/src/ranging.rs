//! Ranging windows, slot allocation and single-sided two-way ranging.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::codec::SlotBitmap;
use crate::config::{NodeAddress, NodeIndex};
use crate::time::{Instant, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RangingError {
    #[error("malformed timestamps: round trip must be positive and reply delay non-negative")]
    MalformedTimestamps,
}

/// A window owned by one node: one slot of size R per allocated neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangingWindow {
    pub owner: NodeAddress,
    pub start: Instant,
    pub slot: Span,
    /// Indexes in slot order.
    pub slots: Vec<NodeIndex>,
}

impl RangingWindow {
    pub fn new(owner: NodeAddress, start: Instant, slot: Span, bitmap: SlotBitmap) -> Self {
        RangingWindow { owner, start, slot, slots: bitmap.iter().collect() }
    }

    pub fn duration(&self) -> Span {
        self.slot * self.slots.len() as u64
    }

    pub fn end(&self) -> Instant {
        self.start + self.duration()
    }
}

/// SS-TWR timestamps in nanoseconds. `t1`/`t4` are on the initiator clock,
/// `t2`/`t3` on the responder clock. Fractional values model sub-tick
/// hardware timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwrTimestamps {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

impl TwrTimestamps {
    /// Timestamps quantized to the simulation tick.
    pub fn from_instants(t1: Instant, t2: Instant, t3: Instant, t4: Instant) -> Self {
        TwrTimestamps {
            t1: t1.as_nanos() as f64,
            t2: t2.as_nanos() as f64,
            t3: t3.as_nanos() as f64,
            t4: t4.as_nanos() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwrEstimate {
    pub distance_m: f64,
    /// Set when a negative time of flight was clamped to zero.
    pub clamped: bool,
}

/// `ToF = ((t4 - t1) - (t3 - t2)) / 2`, distance `= ToF * c`.
pub fn sstwr_distance(ts: &TwrTimestamps, c: f64) -> Result<TwrEstimate, RangingError> {
    let round_trip = ts.t4 - ts.t1;
    let reply = ts.t3 - ts.t2;
    if !(round_trip > 0.0) || !(reply >= 0.0) {
        return Err(RangingError::MalformedTimestamps);
    }
    let tof_ns = (round_trip - reply) / 2.0;
    let distance = tof_ns * 1e-9 * c;
    if distance < 0.0 {
        Ok(TwrEstimate { distance_m: 0.0, clamped: true })
    } else {
        Ok(TwrEstimate { distance_m: distance, clamped: false })
    }
}

/// First-order SS-TWR bias for an initiator clock running `drift` (relative,
/// e.g. `20e-6`) faster than the responder, with reply delay `reply`.
pub fn sstwr_drift_bias(reply: Span, drift: f64, c: f64) -> f64 {
    c * reply.as_secs_f64() * drift / 2.0
}

/// One ranging outcome, as logged and exported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeSample {
    pub initiator: NodeAddress,
    pub responder: NodeAddress,
    pub distance_m: f64,
    pub time: Instant,
    pub success: bool,
}

/// `now + U + j`, `j` uniform on `[-J, +J]`.
pub fn schedule_next_window<R: Rng + ?Sized>(now: Instant, period: Span, jitter: Span, rng: &mut R) -> Instant {
    let base = now + period;
    if jitter.is_zero() {
        return base;
    }
    let j = jitter.as_nanos() as i64;
    let offset = rng.random_range(-j..=j);
    if offset >= 0 {
        base + Span::from_nanos(offset as u64)
    } else {
        base - Span::from_nanos(offset.unsigned_abs())
    }
}

/// `(current - departed) + newly_discovered`.
pub fn allocate_slots(current: SlotBitmap, newly_discovered: &[NodeIndex], departed: &[NodeIndex]) -> SlotBitmap {
    let mut bm = current;
    for &i in departed {
        bm.clear(i);
    }
    for &i in newly_discovered {
        bm.set(i);
    }
    bm
}

pub fn responder_slot_start(window_start: Instant, ordinal: u32, slot: Span) -> Instant {
    assert!(ordinal >= 1, "slot ordinals start at 1");
    window_start + slot * (ordinal as u64 - 1)
}
