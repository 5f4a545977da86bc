//! Per-node protocol state machine: payload construction, index conflict
//! resolution, ranging plans, inhibitor standby, crowd detection and alerts.
//!
//! The node never looks at a clock or a queue. The simulator feeds it
//! events and executes the returned [`Action`]s.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::codec::{free_indexes, AdvFlags, AdvPayload, SlotBitmap};
use crate::config::{NodeAddress, NodeIndex, ProtocolConfig, INDEX_SPACE};
use crate::discovery::{first_packet_time, Channel, NeighborTable};
use crate::ranging::{allocate_slots, responder_slot_start, schedule_next_window, RangeSample};
use crate::time::{Instant, Span};

/// Upper bound on RESPONSE airtime plus flight time after the reply delay.
const EXCHANGE_TAIL: Span = Span::from_micros(200);
const EXCHANGE_MARGIN: Span = Span::from_micros(20);
const POLL_STEP: Span = Span::from_micros(25);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("no free node index left in the neighborhood")]
    IndexSpaceExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Active,
    Standby,
    ScanOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Discovered,
    Expired,
    IndexChange,
    ConflictReport,
    Range,
    Alert,
    CrowdOn,
    CrowdOff,
    Standby,
    Resume,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Discovered => "DISCOVERED",
            EventKind::Expired => "EXPIRED",
            EventKind::IndexChange => "INDEX_CHANGE",
            EventKind::ConflictReport => "CONFLICT_REPORT",
            EventKind::Range => "RANGE",
            EventKind::Alert => "ALERT",
            EventKind::CrowdOn => "CROWD_ON",
            EventKind::CrowdOff => "CROWD_OFF",
            EventKind::Standby => "STANDBY",
            EventKind::Resume => "RESUME",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the engine event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineEvent {
    pub time: Instant,
    pub node: NodeAddress,
    pub kind: EventKind,
    pub details: String,
}

/// Work the simulator must schedule on behalf of a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Own ranging window starting at `start`.
    ScheduleWindow { start: Instant },
    /// Initiate SS-TWR in `owner`'s window; wake at `slot_start - wakeup`.
    /// The POLL time is settled at the slot with [`NodeState::poll_time`].
    Initiate { owner: NodeAddress, window_start: Instant, slot_start: Instant },
    /// Radios off until `until`.
    EnterStandby { until: Instant },
    /// One check scan of length L starting now.
    CheckScan { start: Instant },
    /// Restart the epoch schedule at `at`.
    Resume { at: Instant },
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub address: NodeAddress,
    pub my_index: NodeIndex,
    pub mode: Mode,
    pub inhibitor: bool,
    pub table: NeighborTable,
    pub bitmap: SlotBitmap,
    pub next_window_start: Option<Instant>,
    pub pending_conflict_report: Option<NodeIndex>,
    pub crowd_alarm: bool,
    pub standby_until: Option<Instant>,
    pub epoch: u64,
    cfg: ProtocolConfig,
    rng: ChaCha8Rng,
    last_alert_epoch: BTreeMap<NodeAddress, u64>,
    /// Owner -> (window start, slot start) of the exchanges this node will initiate.
    planned: BTreeMap<NodeAddress, (Instant, Instant)>,
}

impl NodeState {
    /// Fresh node with a uniformly random bootstrap index.
    pub fn new(address: NodeAddress, cfg: ProtocolConfig, seed: u64, inhibitor: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let my_index = NodeIndex::new(rng.random_range(0..INDEX_SPACE as u8)).expect("in range");
        NodeState {
            address,
            my_index,
            mode: Mode::Active,
            inhibitor,
            table: NeighborTable::new(),
            bitmap: SlotBitmap::EMPTY,
            next_window_start: None,
            pending_conflict_report: None,
            crowd_alarm: false,
            standby_until: None,
            epoch: 0,
            cfg,
            rng,
            last_alert_epoch: BTreeMap::new(),
            planned: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn make_payload(&self, adv_first_packet_time: Instant) -> AdvPayload {
        let v = match self.next_window_start {
            Some(w) if !self.inhibitor => w.saturating_since(adv_first_packet_time),
            _ => Span::ZERO,
        };
        AdvPayload {
            sender_index: self.my_index,
            v_us: u32::try_from(v.as_micros()).unwrap_or(u32::MAX),
            conflict_index: self.pending_conflict_report,
            flags: AdvFlags { inhibitor: self.inhibitor, crowd_alarm: self.crowd_alarm },
            bitmap: if self.inhibitor { SlotBitmap::EMPTY } else { self.bitmap },
        }
    }

    /// Uniform draw among the indexes free in this node's view.
    pub fn choose_new_index(&mut self) -> Result<NodeIndex, EngineError> {
        let in_use: BTreeSet<NodeIndex> = self.table.iter().map(|r| r.index).collect();
        let cached: Vec<SlotBitmap> = self.table.iter().map(|r| r.cached_bitmap).collect();
        let free = free_indexes(self.bitmap, &cached, &in_use);
        if free.is_empty() {
            return Err(EngineError::IndexSpaceExhausted);
        }
        Ok(free[self.rng.random_range(0..free.len())])
    }

    fn change_index(&mut self, now: Instant, reason: &str, log: &mut Vec<EngineEvent>) {
        let old = self.my_index;
        let Ok(new) = self.choose_new_index() else { return };
        self.my_index = new;
        self.push(log, now, EventKind::IndexChange, format!("from={} to={} reason={reason}", old.get(), new.get()));
    }

    fn push(&self, log: &mut Vec<EngineEvent>, time: Instant, kind: EventKind, details: String) {
        log.push(EngineEvent { time, node: self.address, kind, details });
    }

    pub fn on_advertisement(
        &mut self,
        payload: &AdvPayload,
        sender: NodeAddress,
        rx_time: Instant,
        rx_channel: Channel,
        rssi: f64,
        log: &mut Vec<EngineEvent>,
    ) -> Vec<Action> {
        let mut actions = Vec::new();
        if self.inhibitor || self.mode == Mode::Standby {
            return actions;
        }
        if payload.flags.inhibitor {
            return self.on_inhibitor(rx_time, log);
        }
        let reference = first_packet_time(rx_time, rx_channel, self.cfg.packet_gap);
        if self.table.update(payload, sender, rx_time, reference, rssi) {
            self.push(log, rx_time, EventKind::Discovered, format!("peer={sender} index={}", payload.sender_index.get()));
            if self.next_window_start.is_none() && self.mode == Mode::Active {
                actions.push(self.schedule_window(rx_time));
            }
        }
        self.update_crowd(rx_time, log);

        if payload.sender_index == self.my_index && self.address < sender {
            self.change_index(rx_time, "collision", log);
        }
        if payload.conflict_index == Some(self.my_index) {
            self.change_index(rx_time, "report", log);
        }
        self.refresh_conflict_report(rx_time, log);

        if self.mode == Mode::Active && payload.v_us > 0 {
            if let Some(ordinal) = payload.bitmap.slot_ordinal(self.my_index) {
                let window_start = reference + Span::from_micros(payload.v_us as u64);
                let half_period = Span::from_nanos(self.cfg.ranging_period.as_nanos() / 2);
                let known = self.planned.get(&sender).is_some_and(|&(p, _)| {
                    let gap = if p > window_start { p - window_start } else { window_start - p };
                    gap < half_period
                });
                let slot_start = responder_slot_start(window_start, ordinal, self.cfg.slot);
                if !known && slot_start >= rx_time + self.cfg.uwb_wakeup {
                    self.planned.insert(sender, (window_start, slot_start));
                    actions.push(Action::Initiate { owner: sender, window_start, slot_start });
                }
            }
        }
        actions
    }

    fn schedule_window(&mut self, now: Instant) -> Action {
        let start = schedule_next_window(now, self.cfg.ranging_period, self.cfg.jitter, &mut self.rng);
        self.next_window_start = Some(start);
        Action::ScheduleWindow { start }
    }

    /// POLL time inside the slot at `slot_start` of `owner`'s window.
    ///
    /// Windows of different owners may overlap in time. Exchanges in the
    /// window of the lowest-addressed owner keep the default offset; every
    /// other initiator slides its POLL within the slot until its exchange
    /// clears the default exchanges of all lower-addressed windows it knows
    /// about, plus its own exchanges in those windows.
    pub fn poll_time(&self, owner: NodeAddress, slot_start: Instant) -> Instant {
        let (r, g, reply) = (self.cfg.slot, self.cfg.poll_guard, self.cfg.reply_delay);
        let default = slot_start + g;
        let span = reply + EXCHANGE_TAIL;
        let slot_end = slot_start + r;
        let mut windows: Vec<(NodeAddress, Instant, u32)> =
            self.table.iter().map(|n| (n.address, n.next_window_start, n.cached_bitmap.count())).collect();
        if let Some(w) = self.next_window_start {
            windows.push((self.address, w, self.bitmap.count()));
        }
        let mut busy: Vec<Instant> = windows
            .into_iter()
            .filter(|&(a, w, n)| a < owner && w < slot_end && slot_start < w + r * n as u64)
            .flat_map(|(_, w, n)| (0..n as u64).map(move |k| w + r * k + g))
            .collect();
        busy.extend(
            self.planned
                .iter()
                .filter(|&(a, &(_, s))| *a < owner && s < slot_end && slot_start < s + r)
                .map(|(a, &(_, s))| self.poll_time(*a, s)),
        );
        let clear = |p: Instant| busy.iter().all(|&q| p + span + EXCHANGE_MARGIN <= q || q + span + EXCHANGE_MARGIN <= p);
        let mut p = default;
        while p + span + g <= slot_end {
            if clear(p) {
                return p;
            }
            p += POLL_STEP;
        }
        default
    }

    /// Reports the lowest index held by two distinct neighbors, if any.
    fn refresh_conflict_report(&mut self, now: Instant, log: &mut Vec<EngineEvent>) {
        let mut seen = BTreeSet::new();
        let dup = self.table.iter().map(|r| r.index).find(|i| !seen.insert(*i));
        if dup.is_some() && dup != self.pending_conflict_report {
            self.push(log, now, EventKind::ConflictReport, format!("index={}", dup.unwrap().get()));
        }
        self.pending_conflict_report = dup;
    }

    fn update_crowd(&mut self, now: Instant, log: &mut Vec<EngineEvent>) {
        let alarm = self.crowd_check();
        if alarm != self.crowd_alarm {
            self.crowd_alarm = alarm;
            let kind = if alarm { EventKind::CrowdOn } else { EventKind::CrowdOff };
            self.push(log, now, kind, format!("neighbors={}", self.table.len()));
        }
    }

    /// Level-triggered: more neighbors than the configured threshold.
    pub fn crowd_check(&self) -> bool {
        self.table.len() > self.cfg.crowd_threshold as usize
    }

    /// Reallocates slots for the neighbors currently in the table and plans
    /// the next window.
    pub fn on_window_end(&mut self, now: Instant) -> Vec<Action> {
        let current: BTreeSet<NodeIndex> = self.table.iter().map(|r| r.index).collect();
        let newly: Vec<NodeIndex> = current.iter().copied().filter(|i| !self.bitmap.contains(*i)).collect();
        let departed: Vec<NodeIndex> = self.bitmap.iter().filter(|i| !current.contains(i)).collect();
        self.bitmap = allocate_slots(self.bitmap, &newly, &departed);
        if self.table.is_empty() || self.mode != Mode::Active {
            self.next_window_start = None;
            Vec::new()
        } else {
            vec![self.schedule_window(now)]
        }
    }

    pub fn on_epoch_boundary(&mut self, now: Instant, epoch: u64, log: &mut Vec<EngineEvent>) {
        self.epoch = epoch;
        if self.mode == Mode::Standby {
            return;
        }
        for rec in self.table.expire(now, self.cfg.expiry_epochs) {
            self.planned.remove(&rec.address);
            self.push(log, now, EventKind::Expired, format!("peer={} index={}", rec.address, rec.index.get()));
        }
        self.update_crowd(now, log);
        self.refresh_conflict_report(now, log);
    }

    pub fn on_inhibitor(&mut self, now: Instant, log: &mut Vec<EngineEvent>) -> Vec<Action> {
        if self.mode == Mode::Standby {
            return Vec::new();
        }
        let until = now + self.cfg.standby;
        self.mode = Mode::Standby;
        self.standby_until = Some(until);
        self.next_window_start = None;
        self.planned.clear();
        self.push(log, now, EventKind::Standby, format!("until_us={}", until.as_micros()));
        vec![Action::EnterStandby { until }]
    }

    pub fn on_standby_end(&mut self, now: Instant) -> Vec<Action> {
        if self.mode != Mode::Standby || self.standby_until.is_some_and(|u| now < u) {
            return Vec::new();
        }
        self.mode = Mode::ScanOnly;
        self.standby_until = None;
        vec![Action::CheckScan { start: now }]
    }

    /// End of a SCAN_ONLY check scan with no inhibitor heard.
    pub fn on_check_scan_end(&mut self, now: Instant, log: &mut Vec<EngineEvent>) -> Vec<Action> {
        if self.mode != Mode::ScanOnly {
            return Vec::new();
        }
        self.mode = Mode::Active;
        self.table.reset_boundary(now);
        self.push(log, now, EventKind::Resume, format!("neighbors={}", self.table.len()));
        let mut actions = vec![Action::Resume { at: now }];
        if !self.table.is_empty() {
            actions.push(self.schedule_window(now));
        }
        actions
    }

    /// Logs an alert for a successful sample closer than the alert distance,
    /// at most once per peer and epoch.
    pub fn alert_check(&mut self, sample: &RangeSample, log: &mut Vec<EngineEvent>) -> bool {
        if !sample.success || sample.distance_m >= self.cfg.alert_distance_m {
            return false;
        }
        if self.last_alert_epoch.get(&sample.responder) == Some(&self.epoch) {
            return false;
        }
        self.last_alert_epoch.insert(sample.responder, self.epoch);
        self.push(
            log,
            sample.time,
            EventKind::Alert,
            format!("peer={} distance_m={:.3}", sample.responder, sample.distance_m),
        );
        true
    }
}
