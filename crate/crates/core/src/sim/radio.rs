//! Unit-disk propagation, collision model, RSSI and SS-TWR timestamp synthesis.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{NodeAddress, PhyConfig, RssiModel};
use crate::discovery::{Channel, ScanWindow};
use crate::ranging::{sstwr_distance, RangeSample, TwrTimestamps};
use crate::time::{Instant, Span};

use super::mobility::distance;

/// One frame on the air. `channel` is `None` for UWB.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub id: u64,
    pub tx: NodeAddress,
    pub pos: (f64, f64),
    pub start: Instant,
    pub end: Instant,
    pub channel: Option<Channel>,
}

impl Transmission {
    fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Frames that may still interfere with a reception in progress.
#[derive(Debug, Clone, Default)]
pub struct Medium {
    range_m: f64,
    live: Vec<Transmission>,
}

impl Medium {
    pub fn new(range_m: f64) -> Self {
        Medium { range_m, live: Vec::new() }
    }

    pub fn register(&mut self, t: Transmission) {
        self.live.push(t);
    }

    pub fn get(&self, id: u64) -> Option<&Transmission> {
        self.live.iter().find(|t| t.id == id)
    }

    /// Drops frames that ended before `t`.
    pub fn prune(&mut self, t: Instant) {
        self.live.retain(|x| x.end >= t);
    }

    /// No other same-channel frame audible at the receiver overlaps `frame`.
    /// The receiver's own transmissions count (half duplex).
    pub fn clear_at(&self, frame: &Transmission, rx: NodeAddress, rx_pos: (f64, f64)) -> bool {
        self.live.iter().all(|o| {
            o.id == frame.id
                || o.channel != frame.channel
                || !o.overlaps(frame)
                || (o.tx != rx && distance(o.pos, rx_pos) > self.range_m)
        })
    }
}

/// What the BLE model needs to know about a potential receiver.
#[derive(Debug, Clone, Copy)]
pub struct Receiver {
    pub address: NodeAddress,
    pub pos: (f64, f64),
    pub scan: Option<ScanWindow>,
}

/// Receivers that get `packet` intact: in range, scanning on its channel for
/// its whole airtime, and with no overlapping same-channel frame audible.
pub fn ble_deliver(packet: &Transmission, candidates: &[Receiver], medium: &Medium, range_m: f64) -> Vec<NodeAddress> {
    let channel = packet.channel.expect("BLE packets carry a channel");
    candidates
        .iter()
        .filter(|r| r.address != packet.tx)
        .filter(|r| distance(r.pos, packet.pos) <= range_m)
        .filter(|r| r.scan.is_some_and(|s| s.covers(channel, packet.start, packet.end)))
        .filter(|r| medium.clear_at(packet, r.address, r.pos))
        .map(|r| r.address)
        .collect()
}

/// Log-distance path loss with Gaussian shadowing.
pub fn rssi_at<R: Rng + ?Sized>(true_distance_m: f64, model: &RssiModel, rng: &mut R) -> f64 {
    let d = true_distance_m.max(1e-3);
    let mean = model.p0_dbm - 10.0 * model.path_loss_exponent * d.log10();
    if model.shadowing_db > 0.0 {
        mean + Normal::new(0.0, model.shadowing_db).expect("finite sigma").sample(rng)
    } else {
        mean
    }
}

/// SS-TWR timestamps for an exchange with one-way flight time `tof_ns`.
/// Clocks run at `1 + drift` relative to true time; offsets are arbitrary,
/// so the poll timestamps are taken as the origin of each clock.
pub fn synthesize_twr(tof_ns: f64, reply: Span, drift_initiator: f64, drift_responder: f64) -> TwrTimestamps {
    let reply_local = reply.as_nanos() as f64;
    let reply_true = reply_local / (1.0 + drift_responder);
    TwrTimestamps { t1: 0.0, t2: 0.0, t3: reply_local, t4: (2.0 * tof_ns + reply_true) * (1.0 + drift_initiator) }
}

/// Ranging endpoint: position and clock drift (relative, e.g. `5e-6`).
#[derive(Debug, Clone, Copy)]
pub struct UwbPeer {
    pub address: NodeAddress,
    pub pos: (f64, f64),
    pub drift: f64,
}

/// Draws the measurement noise for one exchange.
pub fn uwb_noise<R: Rng + ?Sized>(phy: &PhyConfig, rng: &mut R) -> f64 {
    if phy.uwb_noise_m > 0.0 {
        Normal::new(0.0, phy.uwb_noise_m).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Outcome of one interference-free exchange.
pub fn uwb_exchange<R: Rng + ?Sized>(
    initiator: &UwbPeer,
    responder: &UwbPeer,
    t: Instant,
    reply: Span,
    phy: &PhyConfig,
    rng: &mut R,
) -> RangeSample {
    let d = distance(initiator.pos, responder.pos);
    let noise = uwb_noise(phy, rng);
    let success = d <= phy.uwb_range_m;
    let distance_m = if success { measured_distance(d + noise, reply, initiator.drift, responder.drift, phy) } else { 0.0 };
    RangeSample { initiator: initiator.address, responder: responder.address, distance_m, time: t, success }
}

/// Distance the initiator computes when the radio path length is `path_m`.
pub fn measured_distance(path_m: f64, reply: Span, drift_i: f64, drift_r: f64, phy: &PhyConfig) -> f64 {
    let tof_ns = path_m / phy.speed_of_light * 1e9;
    let ts = synthesize_twr(tof_ns, reply, drift_i, drift_r);
    sstwr_distance(&ts, phy.speed_of_light).map(|e| e.distance_m).unwrap_or(0.0)
}
