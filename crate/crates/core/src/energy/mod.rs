//! Additive current model, per-node energy ledgers and battery lifetime.

mod calibrate;

pub use calibrate::{
    calibrate, reference_duty_cycles, reference_scenario, CalibrationReport, DutyCycles, ReferenceCase,
    REFERENCE_TARGETS_MA,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::NodeAddress;
use crate::time::{Instant, Span};

pub const BASELINE_MA: f64 = 0.72;
pub const UWB_DEEPSLEEP_MA: f64 = 5e-6;
pub const DEFAULT_CAPACITY_MAH: f64 = 950.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("average current must be positive, got {0} mA")]
    NonPositiveCurrent(f64),
    #[error("contact ratio must lie in [0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("worn hours per day must lie in (0, 24], got {0}")]
    InvalidWornHours(f64),
    #[error("battery capacity must be positive, got {0} mAh")]
    InvalidCapacity(f64),
    #[error("calibration infeasible: worst relative error {worst:.3} in case {case}")]
    CalibrationInfeasible { case: String, worst: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EnergyState {
    Baseline,
    BleScan,
    BleAdvTx,
    UwbActive,
    UwbWake,
    UwbDeepsleep,
}

impl EnergyState {
    pub const ALL: [EnergyState; 6] = [
        EnergyState::Baseline,
        EnergyState::BleScan,
        EnergyState::BleAdvTx,
        EnergyState::UwbActive,
        EnergyState::UwbWake,
        EnergyState::UwbDeepsleep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnergyState::Baseline => "BASELINE",
            EnergyState::BleScan => "BLE_SCAN",
            EnergyState::BleAdvTx => "BLE_ADV_TX",
            EnergyState::UwbActive => "UWB_ACTIVE",
            EnergyState::UwbWake => "UWB_WAKE",
            EnergyState::UwbDeepsleep => "UWB_DEEPSLEEP",
        }
    }
}

impl fmt::Display for EnergyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Current draw per state, mA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentTable {
    pub baseline_ma: f64,
    pub ble_scan_ma: f64,
    pub ble_adv_tx_ma: f64,
    pub uwb_active_ma: f64,
    pub uwb_wake_ma: f64,
    pub uwb_deepsleep_ma: f64,
}

impl Default for CurrentTable {
    /// Result of [`calibrate`] with the default presets.
    fn default() -> Self {
        CurrentTable {
            baseline_ma: BASELINE_MA,
            ble_scan_ma: 10.26,
            ble_adv_tx_ma: 7.80,
            uwb_active_ma: 136.0,
            uwb_wake_ma: 25.9,
            uwb_deepsleep_ma: UWB_DEEPSLEEP_MA,
        }
    }
}

impl CurrentTable {
    /// Table with only the fixed floor and deep-sleep currents.
    pub fn floor_only(baseline_ma: f64) -> Self {
        CurrentTable {
            baseline_ma,
            ble_scan_ma: 0.0,
            ble_adv_tx_ma: 0.0,
            uwb_active_ma: 0.0,
            uwb_wake_ma: 0.0,
            uwb_deepsleep_ma: UWB_DEEPSLEEP_MA,
        }
    }

    pub fn current(&self, state: EnergyState) -> f64 {
        match state {
            EnergyState::Baseline => self.baseline_ma,
            EnergyState::BleScan => self.ble_scan_ma,
            EnergyState::BleAdvTx => self.ble_adv_tx_ma,
            EnergyState::UwbActive => self.uwb_active_ma,
            EnergyState::UwbWake => self.uwb_wake_ma,
            EnergyState::UwbDeepsleep => self.uwb_deepsleep_ma,
        }
    }

    pub fn is_valid(&self) -> bool {
        EnergyState::ALL.iter().all(|&s| self.current(s).is_finite() && self.current(s) >= 0.0)
    }
}

/// Time spent per state. BASELINE always equals `elapsed`; radio states
/// accrue on top of it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    #[serde(with = "crate::time::micros")]
    pub elapsed: Span,
    pub radio: BTreeMap<EnergyState, Span>,
    pub rangings: u64,
    pub advertisements: u64,
    pub scans: u64,
}

impl EnergyLedger {
    pub fn duration(&self, state: EnergyState) -> Span {
        match state {
            EnergyState::Baseline => self.elapsed,
            s => self.radio.get(&s).copied().unwrap_or(Span::ZERO),
        }
    }

    pub fn add(&mut self, state: EnergyState, span: Span) {
        if state == EnergyState::Baseline {
            self.elapsed += span;
        } else {
            *self.radio.entry(state).or_insert(Span::ZERO) += span;
        }
    }

    /// Fraction of `elapsed` spent in `state`.
    pub fn duty(&self, state: EnergyState) -> f64 {
        self.duration(state).as_secs_f64() / self.elapsed.as_secs_f64()
    }

    /// Sum of two ledgers (e.g. from parallel runs).
    pub fn merge(&mut self, other: &EnergyLedger) {
        self.elapsed += other.elapsed;
        for (&s, &d) in &other.radio {
            *self.radio.entry(s).or_insert(Span::ZERO) += d;
        }
        self.rangings += other.rangings;
        self.advertisements += other.advertisements;
        self.scans += other.scans;
    }
}

/// Battery capacity, mAh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity_mah: f64,
}

impl Default for Battery {
    fn default() -> Self {
        Battery { capacity_mah: DEFAULT_CAPACITY_MAH }
    }
}

impl Battery {
    pub fn new(capacity_mah: f64) -> Result<Self, EnergyError> {
        if capacity_mah > 0.0 && capacity_mah.is_finite() {
            Ok(Battery { capacity_mah })
        } else {
            Err(EnergyError::InvalidCapacity(capacity_mah))
        }
    }
}

/// `BASELINE + sum(duty_state * I_state)` over the radio states.
pub fn average_current(ledger: &EnergyLedger, table: &CurrentTable, elapsed: Span) -> f64 {
    assert!(!elapsed.is_zero(), "average over an empty interval");
    let secs = elapsed.as_secs_f64();
    table.baseline_ma
        + ledger
            .radio
            .iter()
            .map(|(&s, d)| d.as_secs_f64() / secs * table.current(s))
            .sum::<f64>()
}

/// Hours until the battery is empty at a constant `avg_ma`.
pub fn lifetime(avg_ma: f64, battery: Battery) -> Result<f64, EnergyError> {
    if !(avg_ma > 0.0) {
        return Err(EnergyError::NonPositiveCurrent(avg_ma));
    }
    Ok(battery.capacity_mah / avg_ma)
}

/// Lifetime (hours) when a fraction `p` of the time is spent in contact.
pub fn lifetime_mixed(p: f64, i_alone: f64, i_contact: f64, battery: Battery) -> Result<f64, EnergyError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EnergyError::InvalidRatio(p));
    }
    lifetime((1.0 - p) * i_alone + p * i_contact, battery)
}

/// Calendar days for a tag worn `worn_hours_per_day` and off otherwise.
pub fn duty_hours_scale(lifetime_24h_hours: f64, worn_hours_per_day: f64) -> Result<f64, EnergyError> {
    if !(worn_hours_per_day > 0.0 && worn_hours_per_day <= 24.0) {
        return Err(EnergyError::InvalidWornHours(worn_hours_per_day));
    }
    Ok(lifetime_24h_hours / worn_hours_per_day)
}

pub fn hours_to_days(hours: f64) -> f64 {
    hours / 24.0
}

/// Intervals a radio spent in each state. Overlaps resolve to the state
/// listed first in the priority order given to [`RadioTimeline::resolve`].
#[derive(Debug, Clone, Default)]
pub struct RadioTimeline {
    intervals: Vec<(Instant, Instant, EnergyState)>,
}

impl RadioTimeline {
    pub fn push(&mut self, start: Instant, end: Instant, state: EnergyState) {
        if end > start {
            self.intervals.push((start, end, state));
        }
    }

    /// Cuts every interval at `t` (radio switched off).
    pub fn truncate_after(&mut self, t: Instant) {
        self.intervals.retain_mut(|iv| {
            iv.1 = iv.1.min(t);
            iv.0 < iv.1
        });
    }

    /// Time per state within `[lo, hi)`.
    pub fn resolve(&self, lo: Instant, hi: Instant, priority: &[EnergyState]) -> BTreeMap<EnergyState, Span> {
        let mut edges: Vec<(Instant, i32, usize)> = Vec::with_capacity(self.intervals.len() * 2);
        for &(s, e, state) in &self.intervals {
            let (s, e) = (s.max(lo), e.min(hi));
            if s >= e {
                continue;
            }
            let rank = priority.iter().position(|&p| p == state).expect("state has a priority");
            edges.push((s, 1, rank));
            edges.push((e, -1, rank));
        }
        edges.sort();
        let mut open = vec![0i32; priority.len()];
        let mut out = BTreeMap::new();
        let mut prev = lo;
        for (t, delta, rank) in edges {
            if t > prev {
                if let Some(r) = open.iter().position(|&c| c > 0) {
                    *out.entry(priority[r]).or_insert(Span::ZERO) += t - prev;
                }
                prev = t;
            }
            open[rank] += delta;
        }
        out
    }
}

/// One row per (node, state) plus a TOTAL row per node.
pub fn write_energy_report<W: Write>(
    w: W,
    ledgers: &BTreeMap<NodeAddress, EnergyLedger>,
    table: &CurrentTable,
    battery: Battery,
) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["node", "state", "duration_us", "avg_mA", "lifetime_days"])?;
    for (addr, ledger) in ledgers {
        if ledger.elapsed.is_zero() {
            continue;
        }
        let avg = average_current(ledger, table, ledger.elapsed);
        let days = lifetime(avg, battery).map(hours_to_days).unwrap_or(f64::INFINITY);
        let secs = ledger.elapsed.as_secs_f64();
        for s in EnergyState::ALL {
            let d = ledger.duration(s);
            let contribution = d.as_secs_f64() / secs * table.current(s);
            wtr.write_record([
                addr.to_string(),
                s.to_string(),
                d.as_micros().to_string(),
                format!("{contribution:.6}"),
                format!("{days:.3}"),
            ])?;
        }
        wtr.write_record([
            addr.to_string(),
            "TOTAL".to_string(),
            ledger.elapsed.as_micros().to_string(),
            format!("{avg:.6}"),
            format!("{days:.3}"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Lifetime (days) for p = 0, 0.05, ..., 1.
pub fn lifetime_curve(i_alone: f64, i_contact: f64, battery: Battery) -> Result<Vec<(f64, f64)>, EnergyError> {
    (0..=20)
        .map(|k| {
            let p = k as f64 / 20.0;
            Ok((p, hours_to_days(lifetime_mixed(p, i_alone, i_contact, battery)?)))
        })
        .collect()
}

pub fn write_lifetime_curve<W: Write>(w: W, curve: &[(f64, f64)]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["p", "days"])?;
    for (p, days) in curve {
        wtr.write_record([format!("{p:.2}"), format!("{days:.3}")])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ledger(elapsed_s: u64, radio: &[(EnergyState, u64)]) -> EnergyLedger {
        let mut l = EnergyLedger { elapsed: Span::from_secs(elapsed_s), ..Default::default() };
        for &(s, ms) in radio {
            l.add(s, Span::from_millis(ms));
        }
        l
    }

    #[test]
    fn idle_draw_is_the_floor() {
        let l = ledger(900, &[]);
        assert_eq!(average_current(&l, &CurrentTable::default(), l.elapsed), 0.72);
    }

    #[test]
    fn additive_contributions() {
        let t = CurrentTable { ble_scan_ma: 10.0, ..CurrentTable::floor_only(0.72) };
        let l = ledger(10, &[(EnergyState::BleScan, 1000)]);
        assert!((average_current(&l, &t, l.elapsed) - 1.72).abs() < 1e-12);
    }

    #[test]
    fn lifetime_examples() {
        let b = Battery::default();
        assert!((lifetime(1.88, b).unwrap() - 505.3).abs() < 0.1);
        assert!((hours_to_days(lifetime(1.88, b).unwrap()) - 21.0).abs() < 0.1);
        assert!((hours_to_days(lifetime(5.28, b).unwrap()) - 7.5).abs() < 0.05);
        assert!((lifetime(1.2, b).unwrap() - 791.7).abs() < 0.1);
        assert!((hours_to_days(lifetime(1.2, b).unwrap()) - 33.0).abs() < 0.05);
        assert!(lifetime(0.0, b).is_err());
        assert!(Battery::new(-1.0).is_err());
    }

    #[test]
    fn mixed_lifetime_examples() {
        let b = Battery::default();
        assert_eq!(lifetime_mixed(0.0, 1.88, 5.28, b).unwrap(), lifetime(1.88, b).unwrap());
        assert!((hours_to_days(lifetime_mixed(1.0, 1.88, 5.28, b).unwrap()) - 7.5).abs() < 0.05);
        assert!((lifetime_mixed(0.5, 1.88, 5.28, b).unwrap() - 950.0 / 3.58).abs() < 1e-9);
        assert!(lifetime_mixed(1.01, 1.0, 2.0, b).is_err());
    }

    #[test]
    fn worn_hours_scaling() {
        assert!((duty_hours_scale(21.0 * 24.0, 8.0).unwrap() - 63.0).abs() < 1e-9);
        assert_eq!(duty_hours_scale(100.0, 24.0).unwrap(), 100.0 / 24.0);
        assert_eq!(duty_hours_scale(240.0, 12.0).unwrap(), 2.0 * duty_hours_scale(240.0, 24.0).unwrap());
        assert!(duty_hours_scale(1.0, 0.0).is_err());
        assert!(duty_hours_scale(1.0, 25.0).is_err());
    }

    #[test]
    fn curve_has_21_points() {
        let c = lifetime_curve(1.88, 5.28, Battery::default()).unwrap();
        assert_eq!(c.len(), 21);
        assert_eq!(c[0].0, 0.0);
        assert_eq!(c[20].0, 1.0);
        let mut buf = Vec::new();
        write_lifetime_curve(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p,days\n0.00,21.055\n"));
    }

    #[test]
    fn timeline_priority_and_clipping() {
        let mut tl = RadioTimeline::default();
        let ms = Instant::from_millis;
        tl.push(ms(0), ms(10), EnergyState::UwbWake);
        tl.push(ms(5), ms(20), EnergyState::UwbActive);
        tl.push(ms(30), ms(40), EnergyState::UwbWake);
        let r = tl.resolve(ms(0), ms(35), &[EnergyState::UwbActive, EnergyState::UwbWake]);
        assert_eq!(r[&EnergyState::UwbActive], Span::from_millis(15));
        assert_eq!(r[&EnergyState::UwbWake], Span::from_millis(10));
        tl.truncate_after(ms(8));
        let r = tl.resolve(ms(0), ms(100), &[EnergyState::UwbActive, EnergyState::UwbWake]);
        assert_eq!(r[&EnergyState::UwbActive], Span::from_millis(3));
        assert_eq!(r[&EnergyState::UwbWake], Span::from_millis(5));
    }

    #[test]
    fn merge_adds_everything() {
        let mut a = ledger(10, &[(EnergyState::BleScan, 100)]);
        a.scans = 2;
        let b = ledger(5, &[(EnergyState::BleScan, 50), (EnergyState::UwbActive, 7)]);
        a.merge(&b);
        assert_eq!(a.elapsed, Span::from_secs(15));
        assert_eq!(a.duration(EnergyState::BleScan), Span::from_millis(150));
        assert_eq!(a.duration(EnergyState::UwbActive), Span::from_millis(7));
        assert_eq!(a.scans, 2);
    }

    #[test]
    fn report_rows() {
        let mut ledgers = BTreeMap::new();
        ledgers.insert(NodeAddress::from_u64(1), ledger(10, &[(EnergyState::BleScan, 1000)]));
        let mut buf = Vec::new();
        write_energy_report(&mut buf, &ledgers, &CurrentTable::default(), Battery::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + EnergyState::ALL.len() + 1);
        assert!(text.lines().any(|l| l.starts_with("00:00:00:00:00:01,BLE_SCAN,1000000,")));
    }

    proptest! {
        #[test]
        fn average_is_monotone(
            base in prop::collection::vec(0u64..1_000, 5),
            bump_state in 1usize..6,
            bump in 1u64..1_000,
            extra_ma in 0.0f64..50.0,
        ) {
            let table = CurrentTable::default();
            let mut l = EnergyLedger { elapsed: Span::from_secs(100), ..Default::default() };
            for (k, &ms) in base.iter().enumerate() {
                l.add(EnergyState::ALL[k + 1], Span::from_millis(ms));
            }
            let before = average_current(&l, &table, l.elapsed);
            let mut more = l.clone();
            more.add(EnergyState::ALL[bump_state], Span::from_millis(bump));
            prop_assert!(average_current(&more, &table, l.elapsed) >= before);

            let mut hotter = table;
            match bump_state {
                1 => hotter.ble_scan_ma += extra_ma,
                2 => hotter.ble_adv_tx_ma += extra_ma,
                3 => hotter.uwb_active_ma += extra_ma,
                4 => hotter.uwb_wake_ma += extra_ma,
                _ => hotter.uwb_deepsleep_ma += extra_ma,
            }
            prop_assert!(average_current(&l, &hotter, l.elapsed) >= before);
        }

        #[test]
        fn mixed_lifetime_is_bracketed_and_monotone(
            i_alone in 0.5f64..3.0,
            extra in 0.0f64..5.0,
            p in 0.0f64..=1.0,
            dp in 0.0f64..=1.0,
        ) {
            let b = Battery::default();
            let i_contact = i_alone + extra;
            let l = lifetime_mixed(p, i_alone, i_contact, b).unwrap();
            let (la, lc) = (lifetime(i_alone, b).unwrap(), lifetime(i_contact, b).unwrap());
            prop_assert!(la.min(lc) <= l * (1.0 + 1e-12) && l <= la.max(lc) * (1.0 + 1e-12));
            let q = (p + dp).min(1.0);
            prop_assert!(lifetime_mixed(q, i_alone, i_contact, b).unwrap() <= l * (1.0 + 1e-12));
        }
    }
}
