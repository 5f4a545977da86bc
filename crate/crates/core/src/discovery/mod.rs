//! Epoch-based BLE discovery: scan/advertisement schedule, advertisement
//! synchronization and the neighbor table.

mod optimizer;

pub use optimizer::{optimize, DiscoveryModel, OptimizeError, OptimizedSchedule};

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::codec::{AdvPayload, SlotBitmap};
use crate::config::{NodeAddress, NodeIndex, ProtocolConfig};
use crate::time::{Instant, Span};

/// One of the three BLE advertising channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    C37,
    C38,
    C39,
}

impl Channel {
    pub const ADV_SEQUENCE: [Channel; 3] = [Channel::C37, Channel::C38, Channel::C39];

    /// Position of this channel in the 37 -> 38 -> 39 packet sequence.
    pub fn position(self) -> u64 {
        match self {
            Channel::C37 => 0,
            Channel::C38 => 1,
            Channel::C39 => 2,
        }
    }

    pub fn number(self) -> u8 {
        37 + self.position() as u8
    }

    /// Scan channel used in epoch `n` (rotates every epoch).
    pub fn for_epoch(n: u64) -> Channel {
        Channel::ADV_SEQUENCE[(n % 3) as usize]
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.number().fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanWindow {
    pub start: Instant,
    pub end: Instant,
    pub channel: Channel,
}

impl ScanWindow {
    /// Whether `[from, to)` lies entirely inside the scan on `channel`.
    pub fn covers(&self, channel: Channel, from: Instant, to: Instant) -> bool {
        channel == self.channel && from >= self.start && to <= self.end
    }
}

/// What a node does with its BLE radio during one epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochSchedule {
    pub epoch_start: Instant,
    pub scan: ScanWindow,
    pub adv_starts: Vec<Instant>,
}

/// Scan on `[start, start + L)`, then advertisements every `A` from `start + L`
/// for as long as they end within the epoch.
pub fn build_epoch_schedule(cfg: &ProtocolConfig, epoch_start: Instant, epoch_number: u64) -> EpochSchedule {
    let scan = ScanWindow {
        start: epoch_start,
        end: epoch_start + cfg.scan_length,
        channel: Channel::for_epoch(epoch_number),
    };
    let last_start = cfg.epoch - cfg.adv_duration;
    let mut adv_starts = Vec::new();
    let mut offset = cfg.scan_length;
    while offset <= last_start {
        adv_starts.push(epoch_start + offset);
        offset += cfg.adv_interval;
    }
    EpochSchedule { epoch_start, scan, adv_starts }
}

/// Delays every advertisement by a uniform draw (µs resolution) from
/// `[0, effective_adv_delay]`, never past the point where it would run into
/// the next epoch. Consecutive starts stay within `A + delay <= L - b`.
pub fn delay_advertisements<R: Rng + ?Sized>(sched: &mut EpochSchedule, cfg: &ProtocolConfig, rng: &mut R) {
    let bound = cfg.effective_adv_delay();
    if bound.is_zero() {
        return;
    }
    let latest = sched.epoch_start + cfg.epoch - cfg.adv_duration;
    for s in &mut sched.adv_starts {
        let cap = bound.min(latest - *s).as_micros();
        *s = *s + Span::from_micros(rng.random_range(0..=cap));
    }
}

/// Number of advertisements in every epoch under `cfg`.
pub fn advertisements_per_epoch(cfg: &ProtocolConfig) -> u64 {
    (cfg.epoch - cfg.scan_length - cfg.adv_duration).div_span(cfg.adv_interval) + 1
}

/// Start of the advertisement's first packet, given one of its packets.
pub fn first_packet_time(rx_packet_start: Instant, rx_channel: Channel, packet_gap: Span) -> Instant {
    rx_packet_start - packet_gap * rx_channel.position()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRecord {
    pub address: NodeAddress,
    pub index: NodeIndex,
    pub first_heard: Instant,
    pub last_heard: Instant,
    pub epochs_missed: u32,
    pub cached_bitmap: SlotBitmap,
    /// Start of the neighbor's next ranging window as last advertised.
    pub next_window_start: Instant,
    pub last_rssi: f64,
}

/// Neighbor table keyed by address.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborTable {
    records: BTreeMap<NodeAddress, NeighborRecord>,
    last_boundary: Instant,
}

impl NeighborTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, addr: &NodeAddress) -> Option<&NeighborRecord> {
        self.records.get(addr)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NeighborRecord> {
        self.records.values()
    }

    /// Inserts or refreshes the record for `sender`. Returns `true` for a new neighbor.
    ///
    /// `reference` is the first-packet time of the received advertisement. A
    /// window already under way is recorded as starting at `rx_time`.
    pub fn update(
        &mut self,
        payload: &AdvPayload,
        sender: NodeAddress,
        rx_time: Instant,
        reference: Instant,
        rssi: f64,
    ) -> bool {
        let window = (reference + Span::from_micros(payload.v_us as u64)).max(rx_time);
        match self.records.get_mut(&sender) {
            Some(rec) => {
                rec.index = payload.sender_index;
                rec.last_heard = rx_time;
                rec.epochs_missed = 0;
                rec.cached_bitmap = payload.bitmap;
                rec.next_window_start = window;
                rec.last_rssi = rssi;
                false
            }
            None => {
                self.records.insert(
                    sender,
                    NeighborRecord {
                        address: sender,
                        index: payload.sender_index,
                        first_heard: rx_time,
                        last_heard: rx_time,
                        epochs_missed: 0,
                        cached_bitmap: payload.bitmap,
                        next_window_start: window,
                        last_rssi: rssi,
                    },
                );
                true
            }
        }
    }

    /// Epoch-boundary bookkeeping: records not heard since the previous boundary
    /// gain a missed epoch; those reaching `k` are removed and returned.
    pub fn expire(&mut self, boundary: Instant, k: u32) -> Vec<NeighborRecord> {
        let since = self.last_boundary;
        let mut removed = Vec::new();
        self.records.retain(|_, rec| {
            if rec.last_heard >= since {
                rec.epochs_missed = 0;
            } else {
                rec.epochs_missed += 1;
            }
            if rec.epochs_missed >= k {
                removed.push(rec.clone());
                false
            } else {
                true
            }
        });
        self.last_boundary = boundary;
        removed
    }

    /// Restarts missed-epoch counting from `t` (used when leaving standby).
    pub fn reset_boundary(&mut self, t: Instant) {
        self.last_boundary = t;
        for rec in self.records.values_mut() {
            rec.last_heard = rec.last_heard.max(t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::AdvFlags;
    use crate::config::LatencyClass;

    fn example_cfg() -> ProtocolConfig {
        ProtocolConfig {
            scan_length: Span::from_millis(170),
            adv_interval: Span::from_millis(160),
            ..ProtocolConfig::preset(LatencyClass::TwoSeconds)
        }
    }

    fn payload(index: u8, v_us: u32) -> AdvPayload {
        AdvPayload {
            sender_index: NodeIndex::new(index).unwrap(),
            v_us,
            conflict_index: None,
            flags: AdvFlags::default(),
            bitmap: SlotBitmap::EMPTY,
        }
    }

    #[test]
    fn twelve_advertisements_in_two_second_epoch() {
        let s = build_epoch_schedule(&example_cfg(), Instant::ZERO, 0);
        // floor((2000 - 170 - 5) / 160) + 1 = 12
        assert_eq!(s.adv_starts.len(), 12);
        assert_eq!(advertisements_per_epoch(&example_cfg()), 12);
        assert_eq!(s.adv_starts[0], Instant::from_millis(170));
        assert_eq!(*s.adv_starts.last().unwrap(), Instant::from_millis(1930));
        assert!(s.adv_starts.windows(2).all(|w| w[1] - w[0] == Span::from_millis(160)));
        assert!(s.scan.end <= s.adv_starts[0]);
    }

    #[test]
    fn scan_channel_rotates() {
        let cfg = example_cfg();
        assert_eq!(build_epoch_schedule(&cfg, Instant::ZERO, 0).scan.channel, Channel::C37);
        assert_eq!(build_epoch_schedule(&cfg, Instant::ZERO, 4).scan.channel, Channel::C38);
        assert_eq!(build_epoch_schedule(&cfg, Instant::ZERO, 5).scan.channel, Channel::C39);
    }

    #[test]
    fn presets_fill_epoch_exactly() {
        for class in LatencyClass::ALL {
            let cfg = ProtocolConfig::preset(class);
            let s = build_epoch_schedule(&cfg, Instant::from_secs(7), 3);
            let last = *s.adv_starts.last().unwrap();
            assert_eq!(last + cfg.adv_duration, s.epoch_start + cfg.epoch);
        }
    }

    #[test]
    fn delayed_advertisements_keep_the_scan_guarantee() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for class in LatencyClass::ALL {
            let cfg = ProtocolConfig::preset(class);
            assert_eq!(cfg.effective_adv_delay(), Span::from_millis(10));
            let nominal = build_epoch_schedule(&cfg, Instant::from_secs(3), 1);
            for _ in 0..200 {
                let mut s = nominal.clone();
                delay_advertisements(&mut s, &cfg, &mut rng);
                assert_eq!(s.adv_starts.len(), nominal.adv_starts.len());
                assert!(s.adv_starts.iter().zip(&nominal.adv_starts).all(|(d, n)| *d >= *n && *d - *n <= Span::from_millis(10)));
                assert!(s.adv_starts.windows(2).all(|w| w[1] - w[0] <= cfg.scan_length - cfg.adv_duration));
                assert!(*s.adv_starts.last().unwrap() + cfg.adv_duration <= s.epoch_start + cfg.epoch);
            }
        }
    }

    #[test]
    fn zero_delay_leaves_schedule_alone() {
        use rand::SeedableRng;
        let cfg = ProtocolConfig { adv_interval: Span::from_millis(175), ..ProtocolConfig::preset(LatencyClass::TwoSeconds) };
        assert_eq!(cfg.effective_adv_delay(), Span::ZERO);
        let nominal = build_epoch_schedule(&cfg, Instant::ZERO, 0);
        let mut s = nominal.clone();
        delay_advertisements(&mut s, &cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert_eq!(s, nominal);
    }

    #[test]
    fn first_packet_offsets() {
        let t = Instant::from_millis(10);
        let gap = Span::from_micros(400);
        assert_eq!(first_packet_time(t, Channel::C37, gap), t);
        assert_eq!(first_packet_time(t, Channel::C38, gap), t - Span::from_micros(400));
        assert_eq!(first_packet_time(t, Channel::C39, gap), t - Span::from_micros(800));
        for ch in Channel::ADV_SEQUENCE {
            assert_eq!(first_packet_time(t, ch, gap) + gap * ch.position(), t);
        }
    }

    #[test]
    fn update_inserts_then_refreshes() {
        let mut table = NeighborTable::new();
        let a = NodeAddress::from_u64(1);
        assert!(table.update(&payload(3, 500_000), a, Instant::from_millis(100), Instant::from_millis(99), -60.0));
        assert_eq!(table.len(), 1);
        assert_eq!(table.get(&a).unwrap().next_window_start, Instant::from_millis(599));

        assert!(!table.update(&payload(3, 200_000), a, Instant::from_millis(260), Instant::from_millis(260), -61.0));
        assert_eq!(table.len(), 1);
        let rec = table.get(&a).unwrap();
        assert_eq!(rec.next_window_start, Instant::from_millis(460));
        assert_eq!(rec.epochs_missed, 0);
        assert_eq!(rec.first_heard, Instant::from_millis(100));
    }

    #[test]
    fn silent_neighbor_expires_on_kth_boundary() {
        let mut table = NeighborTable::new();
        let a = NodeAddress::from_u64(1);
        let b = NodeAddress::from_u64(2);
        table.update(&payload(1, 0), a, Instant::from_millis(100), Instant::from_millis(100), -60.0);
        table.update(&payload(2, 0), b, Instant::from_millis(100), Instant::from_millis(100), -60.0);
        assert!(table.expire(Instant::from_secs(2), 3).is_empty());
        // b keeps talking, a falls silent.
        for epoch in 2..=4u64 {
            let t = Instant::from_secs(2 * epoch - 1);
            table.update(&payload(2, 0), b, t, t, -60.0);
            let removed = table.expire(Instant::from_secs(2 * epoch), 3);
            if epoch < 4 {
                assert!(removed.is_empty());
                assert_eq!(table.get(&a).unwrap().epochs_missed, (epoch - 1) as u32);
            } else {
                assert_eq!(removed.len(), 1);
                assert_eq!(removed[0].address, a);
            }
            assert_eq!(table.get(&b).unwrap().epochs_missed, 0);
            assert!(table.iter().all(|r| r.epochs_missed < 3));
        }
        assert!(NeighborTable::new().expire(Instant::from_secs(1), 3).is_empty());
    }
}
