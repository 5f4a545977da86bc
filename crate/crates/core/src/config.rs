//! Identifiers and validated protocol / physical-layer configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::time::{micros, Span};

/// Number of addressable slots in an advertised bitmap (13 bytes).
pub const INDEX_SPACE: usize = 104;

/// Speed of radio propagation in air, m/s.
pub const SPEED_OF_LIGHT_AIR: f64 = 299_702_547.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("constraint violated on `{field}`: {reason}")]
    ConstraintViolation { field: &'static str, reason: String },
}

fn violation(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::ConstraintViolation { field, reason: reason.into() }
}

/// 6-byte node address, ordered byte-lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeAddress(pub [u8; 6]);

impl NodeAddress {
    /// Address whose big-endian value is the low 48 bits of `v`.
    pub fn from_u64(v: u64) -> Self {
        let b = v.to_be_bytes();
        NodeAddress([b[2], b[3], b[4], b[5], b[6], b[7]])
    }

    pub fn to_u64(self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64)
    }
}

impl fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", b[0], b[1], b[2], b[3], b[4], b[5])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid node address `{0}` (expected six colon-separated hex bytes)")]
pub struct AddressParseError(String);

impl FromStr for NodeAddress {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(AddressParseError(s.to_string()));
        }
        let mut out = [0u8; 6];
        for (slot, part) in out.iter_mut().zip(parts) {
            if part.len() != 2 {
                return Err(AddressParseError(s.to_string()));
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| AddressParseError(s.to_string()))?;
        }
        Ok(NodeAddress(out))
    }
}

impl Serialize for NodeAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Locally unique 1-byte node index, always below [`INDEX_SPACE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeIndex(u8);

impl NodeIndex {
    pub fn new(v: u8) -> Option<Self> {
        ((v as usize) < INDEX_SPACE).then_some(NodeIndex(v))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = NodeIndex> {
        (0..INDEX_SPACE as u8).map(NodeIndex)
    }
}

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The three detection-latency classes used for presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatencyClass {
    #[serde(rename = "2s")]
    TwoSeconds,
    #[serde(rename = "15s")]
    FifteenSeconds,
    #[serde(rename = "30s")]
    ThirtySeconds,
}

impl LatencyClass {
    pub const ALL: [LatencyClass; 3] =
        [LatencyClass::TwoSeconds, LatencyClass::FifteenSeconds, LatencyClass::ThirtySeconds];

    pub fn epoch(self) -> Span {
        match self {
            LatencyClass::TwoSeconds => Span::from_secs(2),
            LatencyClass::FifteenSeconds => Span::from_secs(15),
            LatencyClass::ThirtySeconds => Span::from_secs(30),
        }
    }
}

impl FromStr for LatencyClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" | "2s" => Ok(LatencyClass::TwoSeconds),
            "15" | "15s" => Ok(LatencyClass::FifteenSeconds),
            "30" | "30s" => Ok(LatencyClass::ThirtySeconds),
            other => Err(format!("unknown latency class `{other}` (expected 2s, 15s or 30s)")),
        }
    }
}

/// Protocol timing parameters. All durations serialize as integer microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Discovery epoch E.
    #[serde(with = "micros")]
    pub epoch: Span,
    /// Scan length L at the start of every epoch.
    #[serde(with = "micros")]
    pub scan_length: Span,
    /// Advertisement duration b (three packets plus radio overhead).
    #[serde(with = "micros")]
    pub adv_duration: Span,
    /// Interval A between advertisement starts.
    #[serde(with = "micros")]
    pub adv_interval: Span,
    /// Start-to-start gap between the 37/38/39 packets of one advertisement.
    #[serde(with = "micros")]
    pub packet_gap: Span,
    /// Ranging window period U.
    #[serde(with = "micros")]
    pub ranging_period: Span,
    /// Ranging window jitter bound J.
    #[serde(with = "micros")]
    pub jitter: Span,
    /// Ranging slot size R.
    #[serde(with = "micros")]
    pub slot: Span,
    /// Silent epochs before a neighbor is dropped (K).
    pub expiry_epochs: u32,
    /// Standby time after hearing an inhibitor.
    #[serde(with = "micros")]
    pub standby: Span,
    /// Crowd alarm fires when the neighbor count exceeds this.
    pub crowd_threshold: u32,
    /// Real-time alert distance, meters.
    pub alert_distance_m: f64,
    /// Delay between slot start and the POLL transmission.
    #[serde(with = "micros", default = "defaults::poll_guard")]
    pub poll_guard: Span,
    /// Responder turnaround between POLL and RESPONSE timestamps.
    #[serde(with = "micros", default = "defaults::reply_delay")]
    pub reply_delay: Span,
    /// UWB resume time out of deep sleep.
    #[serde(with = "micros", default = "defaults::uwb_wakeup")]
    pub uwb_wakeup: Span,
    /// Upper bound of the random delay added to each advertisement start, as
    /// BLE does to keep periodic advertisers from colliding forever. Capped by
    /// `effective_adv_delay`.
    #[serde(with = "micros", default = "defaults::adv_delay")]
    pub adv_delay: Span,
}

mod defaults {
    use crate::time::Span;

    pub fn poll_guard() -> Span {
        Span::from_micros(200)
    }
    pub fn reply_delay() -> Span {
        Span::from_micros(300)
    }
    pub fn uwb_wakeup() -> Span {
        Span::from_micros(5_500)
    }
    pub fn adv_delay() -> Span {
        Span::from_millis(10)
    }
}

impl ProtocolConfig {
    /// Validated configuration for one of the three latency classes.
    pub fn preset(class: LatencyClass) -> Self {
        // (L, A) per class: the last advertisement of each epoch ends exactly at
        // the next scan start, so every scan is bracketed by advertisements.
        let (scan_ms, interval_ms) = match class {
            LatencyClass::TwoSeconds => (180, 165),
            LatencyClass::FifteenSeconds => (295, 245),
            LatencyClass::ThirtySeconds => (395, 370),
        };
        let epoch = class.epoch();
        let cfg = ProtocolConfig {
            epoch,
            scan_length: Span::from_millis(scan_ms),
            adv_duration: Span::from_millis(5),
            adv_interval: Span::from_millis(interval_ms),
            packet_gap: Span::from_micros(400),
            ranging_period: epoch,
            jitter: Span::from_nanos(epoch.as_nanos() / 20),
            slot: Span::from_millis(4),
            expiry_epochs: 3,
            standby: Span::from_secs(300),
            crowd_threshold: 10,
            alert_distance_m: 2.0,
            poll_guard: defaults::poll_guard(),
            reply_delay: defaults::reply_delay(),
            uwb_wakeup: defaults::uwb_wakeup(),
            adv_delay: defaults::adv_delay(),
        };
        debug_assert!(cfg.validate().is_ok());
        cfg
    }

    /// Advertisement delay bound actually used: at most `L - b - A`, so that
    /// start-to-start gaps never exceed `L - b` and a scan still holds a full
    /// advertisement.
    pub fn effective_adv_delay(&self) -> Span {
        let slack = self.scan_length.saturating_sub(self.adv_duration).saturating_sub(self.adv_interval);
        self.adv_delay.min(slack)
    }

    /// Checks every timing invariant; the error names the first violated field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.adv_duration.is_zero() {
            return Err(violation("adv_duration", "must be positive"));
        }
        if self.adv_duration >= self.scan_length {
            return Err(violation("scan_length", "must exceed the advertisement duration b"));
        }
        if self.scan_length >= self.epoch {
            return Err(violation("scan_length", "must be shorter than the epoch E"));
        }
        if self.adv_interval.is_zero() {
            return Err(violation("adv_interval", "must be positive"));
        }
        if self.adv_interval > self.scan_length - self.adv_duration {
            return Err(violation("adv_interval", "A must not exceed L - b"));
        }
        if self.packet_gap * 2 >= self.adv_duration {
            return Err(violation("packet_gap", "three packets must fit in the advertisement"));
        }
        if self.slot.is_zero() {
            return Err(violation("slot", "must be positive"));
        }
        if self.ranging_period.is_zero() {
            return Err(violation("ranging_period", "must be positive"));
        }
        if self.jitter * 2 >= self.ranging_period {
            return Err(violation("jitter", "J must be below U/2"));
        }
        if self.expiry_epochs == 0 {
            return Err(violation("expiry_epochs", "must be at least 1"));
        }
        if !(self.alert_distance_m.is_finite() && self.alert_distance_m > 0.0) {
            return Err(violation("alert_distance_m", "must be positive"));
        }
        if self.poll_guard + self.reply_delay >= self.slot {
            return Err(violation("reply_delay", "exchange does not fit in a slot"));
        }
        Ok(())
    }
}

/// Log-distance RSSI model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiModel {
    /// Received power at 1 m, dBm.
    pub p0_dbm: f64,
    /// Path-loss exponent n.
    pub path_loss_exponent: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadowing_db: f64,
}

/// Physical-layer parameters of the simulated radios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyConfig {
    pub ble_range_m: f64,
    pub uwb_range_m: f64,
    /// Standard deviation of UWB distance noise, meters.
    pub uwb_noise_m: f64,
    pub rssi: RssiModel,
    #[serde(default = "phy_defaults::speed_of_light")]
    pub speed_of_light: f64,
    /// Per-node clock drift is drawn uniformly from +/- this bound.
    pub clock_drift_ppm: f64,
    /// Extra uniform packet loss probability on top of collisions.
    #[serde(default)]
    pub loss_probability: f64,
    /// On-air time of one BLE advertising packet.
    #[serde(with = "micros", default = "phy_defaults::ble_packet")]
    pub ble_packet_airtime: Span,
    /// On-air time of one UWB frame (POLL or RESPONSE).
    #[serde(with = "micros", default = "phy_defaults::uwb_frame")]
    pub uwb_frame_airtime: Span,
}

mod phy_defaults {
    use crate::time::Span;

    pub fn speed_of_light() -> f64 {
        super::SPEED_OF_LIGHT_AIR
    }
    // 38 bytes on air at 1 Mbit/s.
    pub fn ble_packet() -> Span {
        Span::from_micros(304)
    }
    pub fn uwb_frame() -> Span {
        Span::from_micros(120)
    }
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            ble_range_m: 25.0,
            uwb_range_m: 30.0,
            uwb_noise_m: 0.05,
            rssi: RssiModel { p0_dbm: -59.0, path_loss_exponent: 2.0, shadowing_db: 4.0 },
            speed_of_light: SPEED_OF_LIGHT_AIR,
            clock_drift_ppm: 1.0,
            loss_probability: 0.0,
            ble_packet_airtime: phy_defaults::ble_packet(),
            uwb_frame_airtime: phy_defaults::uwb_frame(),
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.ble_range_m > 0.0) {
            return Err(violation("ble_range_m", "must be positive"));
        }
        if !(self.uwb_range_m > 0.0) {
            return Err(violation("uwb_range_m", "must be positive"));
        }
        if !(self.uwb_noise_m >= 0.0) {
            return Err(violation("uwb_noise_m", "must be non-negative"));
        }
        if !(self.rssi.shadowing_db >= 0.0) {
            return Err(violation("rssi.shadowing_db", "must be non-negative"));
        }
        if self.speed_of_light != SPEED_OF_LIGHT_AIR {
            return Err(violation("speed_of_light", "fixed at 299702547 m/s"));
        }
        if !(self.clock_drift_ppm >= 0.0 && self.clock_drift_ppm < 1_000.0) {
            return Err(violation("clock_drift_ppm", "must be in [0, 1000)"));
        }
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(violation("loss_probability", "must be in [0, 1]"));
        }
        if self.ble_packet_airtime.is_zero() || self.uwb_frame_airtime.is_zero() {
            return Err(violation("airtime", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: ConfigError) -> &'static str {
        match err {
            ConfigError::ConstraintViolation { field, .. } => field,
        }
    }

    fn example_config() -> ProtocolConfig {
        ProtocolConfig {
            epoch: Span::from_secs(2),
            scan_length: Span::from_millis(170),
            adv_duration: Span::from_millis(5),
            adv_interval: Span::from_millis(160),
            ranging_period: Span::from_secs(2),
            jitter: Span::from_millis(100),
            slot: Span::from_millis(4),
            ..ProtocolConfig::preset(LatencyClass::TwoSeconds)
        }
    }

    #[test]
    fn hand_checked_config_is_valid() {
        // 5 < 170 < 2000, 160 <= 165, 4 > 0, 2000 > 0, 100 < 1000
        assert_eq!(example_config().validate(), Ok(()));
    }

    #[test]
    fn scan_not_shorter_than_epoch_is_rejected() {
        let cfg = ProtocolConfig { scan_length: Span::from_secs(2), ..example_config() };
        assert_eq!(field_of(cfg.validate().unwrap_err()), "scan_length");
    }

    #[test]
    fn interval_equal_to_scan_is_rejected() {
        let cfg = ProtocolConfig { adv_interval: Span::from_millis(170), ..example_config() };
        assert_eq!(field_of(cfg.validate().unwrap_err()), "adv_interval");
    }

    #[test]
    fn jitter_of_half_period_is_rejected() {
        let cfg = ProtocolConfig { jitter: Span::from_secs(1), ..example_config() };
        assert_eq!(field_of(cfg.validate().unwrap_err()), "jitter");
    }

    #[test]
    fn presets_validate_and_match_latency() {
        for class in LatencyClass::ALL {
            let cfg = ProtocolConfig::preset(class);
            assert_eq!(cfg.validate(), Ok(()));
            assert_eq!(cfg.epoch, class.epoch());
            assert_eq!(cfg.ranging_period, cfg.epoch);
            assert_eq!(cfg.standby, Span::from_secs(300));
        }
        assert_eq!(ProtocolConfig::preset(LatencyClass::TwoSeconds).epoch, Span::from_secs(2));
        assert_eq!(ProtocolConfig::preset(LatencyClass::ThirtySeconds).epoch, Span::from_secs(30));
    }

    #[test]
    fn presets_end_last_advertisement_at_epoch_end() {
        for class in LatencyClass::ALL {
            let c = ProtocolConfig::preset(class);
            let train = c.epoch - c.scan_length - c.adv_duration;
            assert_eq!(train.as_nanos() % c.adv_interval.as_nanos(), 0, "{class:?}");
        }
    }

    #[test]
    fn config_json_uses_microseconds() {
        let cfg = ProtocolConfig::preset(LatencyClass::TwoSeconds);
        let v = serde_json::to_value(&cfg).unwrap();
        assert_eq!(v["epoch"], 2_000_000);
        assert_eq!(v["packet_gap"], 400);
        let back: ProtocolConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn address_parsing_and_order() {
        let a: NodeAddress = "00:00:00:00:01:ff".parse().unwrap();
        assert_eq!(a, NodeAddress::from_u64(0x1ff));
        assert_eq!(a.to_string(), "00:00:00:00:01:ff");
        assert!(NodeAddress([0, 0, 0, 0, 0, 1]) < NodeAddress([0, 0, 0, 0, 1, 0]));
        assert!("00:00:00:00:01".parse::<NodeAddress>().is_err());
        assert!("zz:00:00:00:00:01".parse::<NodeAddress>().is_err());
    }

    #[test]
    fn index_bounds() {
        assert!(NodeIndex::new(103).is_some());
        assert!(NodeIndex::new(104).is_none());
        assert_eq!(NodeIndex::all().count(), INDEX_SPACE);
    }

    #[test]
    fn phy_defaults_validate() {
        assert_eq!(PhyConfig::default().validate(), Ok(()));
        let bad = PhyConfig { speed_of_light: 3e8, ..PhyConfig::default() };
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn address_order_is_strict_total(a in proptest::prelude::any::<[u8; 6]>(), b in proptest::prelude::any::<[u8; 6]>()) {
            let (a, b) = (NodeAddress(a), NodeAddress(b));
            if a != b {
                proptest::prop_assert!((a < b) ^ (b < a));
            }
            proptest::prop_assert_eq!(a.cmp(&b), a.to_u64().cmp(&b.to_u64()));
        }
    }
}
