//! Deterministic discrete-event simulation of a population of nodes.
//!
//! One time-ordered queue drives everything. Ties break on
//! (time, node address, event rank, insertion order), so a scenario and a
//! seed fully determine the output.

pub mod mobility;
pub mod output;
pub mod radio;
pub mod scenario;

pub use mobility::{position_at, Waypoint};
pub use output::{LatencyRecord, RssiSample, SimOutput, SlotCollision};
pub use scenario::{derive_seed, static_node, NodeSpec, Role, Scenario, ScenarioError};

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::AdvPayload;
use crate::config::{NodeAddress, NodeIndex, PhyConfig, ProtocolConfig};
use crate::discovery::{build_epoch_schedule, delay_advertisements, Channel, ScanWindow};
use crate::energy::{EnergyLedger, EnergyState, RadioTimeline};
use crate::engine::{Action, EngineEvent, EventKind, Mode, NodeState};
use crate::ranging::RangeSample;
use crate::time::{Instant, Span};

use mobility::{distance, is_static};
use radio::{measured_distance, rssi_at, uwb_noise, Medium, Receiver, Transmission};
use scenario::{STREAM_ADV, STREAM_ENGINE, STREAM_PHY};

/// Knobs that are not part of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Start every node with this index instead of a random one.
    pub initial_index: Option<NodeIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    EpochStart { gen: u64 },
    CheckScanEnd { gen: u64 },
    StandbyEnd,
    WindowEnd { start: Instant },
    WindowStart { start: Instant },
    AdvStart { gen: u64 },
    SlotStart { owner: NodeAddress },
    PacketEnd { id: u64 },
    PollEnd { ex: u64 },
    RespEnd { ex: u64 },
    MobilityTick,
}

impl Ev {
    fn rank(&self) -> u8 {
        match self {
            Ev::EpochStart { .. } => 0,
            Ev::CheckScanEnd { .. } => 1,
            Ev::StandbyEnd => 2,
            Ev::WindowEnd { .. } => 3,
            Ev::WindowStart { .. } => 4,
            Ev::AdvStart { .. } => 5,
            Ev::SlotStart { .. } => 6,
            Ev::PacketEnd { .. } => 7,
            Ev::PollEnd { .. } => 8,
            Ev::RespEnd { .. } => 9,
            Ev::MobilityTick => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Queued {
    time: Instant,
    node: NodeAddress,
    rank: u8,
    seq: u64,
    ev: Ev,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.node, self.rank, self.seq).cmp(&(other.time, other.node, other.rank, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Node {
    address: NodeAddress,
    boot: Instant,
    waypoints: Vec<Waypoint>,
    cfg: ProtocolConfig,
    state: NodeState,
    drift: f64,
    rng: ChaCha8Rng,
    adv_rng: ChaCha8Rng,
    gen: u64,
    epochs: u64,
    last_scan: Option<ScanWindow>,
    window: Option<(Instant, Instant)>,
    standby_since: Option<Instant>,
    off: Span,
    ble: RadioTimeline,
    uwb: RadioTimeline,
    rangings: u64,
    advertisements: u64,
    scans: u64,
}

impl Node {
    fn pos(&self, t: Instant) -> (f64, f64) {
        position_at(&self.waypoints, t)
    }
}

struct Packet {
    frame: Transmission,
    bytes: [u8; crate::codec::PAYLOAD_LEN],
}

struct Exchange {
    initiator: usize,
    owner: usize,
    t1: Instant,
    poll_id: u64,
    resp_id: Option<u64>,
    t3: Instant,
    true_distance: f64,
    noise: f64,
}

const MOBILITY_STEP: Span = Span::from_millis(100);

struct Sim<'a> {
    phy: &'a PhyConfig,
    end: Instant,
    nodes: Vec<Node>,
    by_addr: BTreeMap<NodeAddress, usize>,
    queue: BinaryHeap<Reverse<Queued>>,
    seq: u64,
    next_id: u64,
    now: Instant,
    ble: Medium,
    uwb: Medium,
    packets: BTreeMap<u64, Packet>,
    exchanges: BTreeMap<u64, Exchange>,
    claims: BTreeMap<(NodeAddress, Instant), Vec<NodeAddress>>,
    in_range_since: BTreeMap<(usize, usize), Instant>,
    out: SimOutput,
}

/// Runs `scenario` to completion.
pub fn run(scenario: &Scenario) -> Result<SimOutput, ScenarioError> {
    run_with(scenario, &SimOptions::default())
}

pub fn run_with(scenario: &Scenario, opts: &SimOptions) -> Result<SimOutput, ScenarioError> {
    scenario.validate()?;
    let boots = scenario.boot_times();
    let mut specs: Vec<(usize, &NodeSpec)> = scenario.nodes.iter().enumerate().collect();
    specs.sort_by_key(|(_, n)| n.address);

    let mut nodes = Vec::with_capacity(specs.len());
    for (i, spec) in specs {
        let cfg = scenario.protocol_for(spec);
        let key = spec.address.to_u64();
        let mut state = NodeState::new(
            spec.address,
            cfg.clone(),
            derive_seed(scenario.seed, key, STREAM_ENGINE),
            spec.role == Role::Inhibitor,
        );
        if let Some(idx) = opts.initial_index {
            state.my_index = idx;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, key, STREAM_PHY));
        let ppm = scenario.phy.clock_drift_ppm;
        let drift = if ppm > 0.0 { rng.random_range(-ppm..=ppm) * 1e-6 } else { 0.0 };
        nodes.push(Node {
            address: spec.address,
            boot: boots[i],
            waypoints: spec.waypoints.clone(),
            cfg,
            state,
            drift,
            rng,
            adv_rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, key, STREAM_ADV)),
            gen: 0,
            epochs: 0,
            last_scan: None,
            window: None,
            standby_since: None,
            off: Span::ZERO,
            ble: RadioTimeline::default(),
            uwb: RadioTimeline::default(),
            rangings: 0,
            advertisements: 0,
            scans: 0,
        });
    }
    let by_addr = nodes.iter().enumerate().map(|(i, n)| (n.address, i)).collect();
    let mut sim = Sim {
        phy: &scenario.phy,
        end: Instant::ZERO + scenario.duration,
        nodes,
        by_addr,
        queue: BinaryHeap::new(),
        seq: 0,
        next_id: 0,
        now: Instant::ZERO,
        ble: Medium::new(scenario.phy.ble_range_m),
        uwb: Medium::new(scenario.phy.uwb_range_m),
        packets: BTreeMap::new(),
        exchanges: BTreeMap::new(),
        claims: BTreeMap::new(),
        in_range_since: BTreeMap::new(),
        out: SimOutput::default(),
    };
    sim.start(scenario.nodes.iter().any(|n| !is_static(&n.waypoints)));
    sim.run();
    Ok(sim.finish())
}

impl Sim<'_> {
    fn push(&mut self, time: Instant, node: usize, ev: Ev) {
        if time >= self.end {
            return;
        }
        self.seq += 1;
        let q = Queued { time, node: self.nodes[node].address, rank: ev.rank(), seq: self.seq, ev };
        self.queue.push(Reverse(q));
    }

    fn id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn start(&mut self, mobile: bool) {
        for i in 0..self.nodes.len() {
            self.out.initial_indexes.insert(self.nodes[i].address, self.nodes[i].state.my_index);
            let boot = self.nodes[i].boot;
            self.push(boot, i, Ev::EpochStart { gen: 0 });
        }
        self.update_ranges(Instant::ZERO);
        if mobile {
            self.push(Instant::ZERO + MOBILITY_STEP, 0, Ev::MobilityTick);
        }
    }

    fn run(&mut self) {
        while let Some(Reverse(q)) = self.queue.pop() {
            debug_assert!(q.time >= self.now, "event out of order");
            self.now = q.time;
            let i = self.by_addr[&q.node];
            match q.ev {
                Ev::EpochStart { gen } => self.epoch_start(i, gen),
                Ev::AdvStart { gen } => self.adv_start(i, gen),
                Ev::PacketEnd { id } => self.packet_end(id),
                Ev::CheckScanEnd { gen } => {
                    if gen == self.nodes[i].gen {
                        let acts = self.nodes[i].state.on_check_scan_end(self.now, &mut self.out.events);
                        self.apply(i, acts);
                    }
                }
                Ev::StandbyEnd => {
                    let n = &mut self.nodes[i];
                    if let Some(since) = n.standby_since.take() {
                        n.off += self.now - since;
                    }
                    let acts = n.state.on_standby_end(self.now);
                    self.apply(i, acts);
                }
                Ev::WindowStart { start } => self.window_start(i, start),
                Ev::WindowEnd { start } => {
                    if self.nodes[i].state.next_window_start == Some(start) {
                        let acts = self.nodes[i].state.on_window_end(self.now);
                        self.apply(i, acts);
                    }
                }
                Ev::SlotStart { owner } => self.slot_start(i, owner),
                Ev::PollEnd { ex } => self.poll_end(ex),
                Ev::RespEnd { ex } => self.resp_end(ex),
                Ev::MobilityTick => {
                    self.update_ranges(self.now);
                    self.push(self.now + MOBILITY_STEP, 0, Ev::MobilityTick);
                }
            }
        }
    }

    fn epoch_start(&mut self, i: usize, gen: u64) {
        let now = self.now;
        let n = &mut self.nodes[i];
        if gen != n.gen {
            return;
        }
        let k = n.epochs;
        n.epochs += 1;
        n.state.on_epoch_boundary(now, k, &mut self.out.events);
        let mut sched = build_epoch_schedule(&n.cfg, now, k);
        delay_advertisements(&mut sched, &n.cfg, &mut n.adv_rng);
        if !n.state.inhibitor {
            n.last_scan = Some(sched.scan);
            n.ble.push(sched.scan.start, sched.scan.end, EnergyState::BleScan);
            n.scans += 1;
        }
        let next = now + n.cfg.epoch;
        for s in sched.adv_starts {
            self.push(s, i, Ev::AdvStart { gen });
        }
        self.push(next, i, Ev::EpochStart { gen });
    }

    fn adv_start(&mut self, i: usize, gen: u64) {
        let now = self.now;
        if gen != self.nodes[i].gen {
            return;
        }
        let payload = self.nodes[i].state.make_payload(now);
        let bytes = payload.encode();
        let pos = self.nodes[i].pos(now);
        let (gap, b) = (self.nodes[i].cfg.packet_gap, self.nodes[i].cfg.adv_duration);
        for ch in Channel::ADV_SEQUENCE {
            let id = self.id();
            let start = now + gap * ch.position();
            let frame = Transmission {
                id,
                tx: self.nodes[i].address,
                pos,
                start,
                end: start + self.phy.ble_packet_airtime,
                channel: Some(ch),
            };
            self.ble.register(frame.clone());
            self.push(frame.end, i, Ev::PacketEnd { id });
            self.packets.insert(id, Packet { frame, bytes });
        }
        let n = &mut self.nodes[i];
        n.ble.push(now, now + b, EnergyState::BleAdvTx);
        n.advertisements += 1;
    }

    fn packet_end(&mut self, id: u64) {
        let now = self.now;
        let Some(pkt) = self.packets.remove(&id) else { return };
        let receivers: Vec<Receiver> = self
            .nodes
            .iter()
            .map(|n| Receiver { address: n.address, pos: n.pos(now), scan: n.last_scan })
            .collect();
        let delivered = radio::ble_deliver(&pkt.frame, &receivers, &self.ble, self.phy.ble_range_m);
        let tx = self.by_addr[&pkt.frame.tx];
        for addr in delivered {
            let r = self.by_addr[&addr];
            if self.lost(r) {
                continue;
            }
            let Ok(payload) = AdvPayload::decode(&pkt.bytes) else { continue };
            let d = distance(receivers[r].pos, pkt.frame.pos);
            let rssi = rssi_at(d, &self.phy.rssi, &mut self.nodes[r].rng);
            self.out.rssi.push(RssiSample { time: pkt.frame.start, receiver: addr, sender: pkt.frame.tx, rssi_dbm: rssi, distance_m: d });
            let before = self.out.events.len();
            let ch = pkt.frame.channel.expect("BLE channel");
            let acts = self.nodes[r].state.on_advertisement(&payload, pkt.frame.tx, pkt.frame.start, ch, rssi, &mut self.out.events);
            if self.out.events[before..].iter().any(|e| e.kind == EventKind::Discovered) {
                self.record_latency(r, tx, now);
            }
            self.apply(r, acts);
        }
        self.ble.prune(now.saturating_sub(Span::from_millis(2)));
    }

    fn lost(&mut self, receiver: usize) -> bool {
        let p = self.phy.loss_probability;
        p > 0.0 && self.nodes[receiver].rng.random_bool(p)
    }

    fn record_latency(&mut self, observer: usize, neighbor: usize, now: Instant) {
        let key = (observer.min(neighbor), observer.max(neighbor));
        let contact = self.in_range_since.get(&key).copied().unwrap_or(now);
        let since = self.nodes[observer].boot.max(self.nodes[neighbor].boot).max(contact);
        self.out.latency.push(LatencyRecord {
            observer: self.nodes[observer].address,
            neighbor: self.nodes[neighbor].address,
            since,
            discovered: now,
        });
    }

    fn update_ranges(&mut self, t: Instant) {
        for a in 0..self.nodes.len() {
            for b in a + 1..self.nodes.len() {
                let inside = distance(self.nodes[a].pos(t), self.nodes[b].pos(t)) <= self.phy.ble_range_m;
                if !inside {
                    self.in_range_since.remove(&(a, b));
                } else {
                    self.in_range_since.entry((a, b)).or_insert(t);
                }
            }
        }
    }

    fn apply(&mut self, i: usize, actions: Vec<Action>) {
        let now = self.now;
        for a in actions {
            match a {
                Action::ScheduleWindow { start } => self.push(start, i, Ev::WindowStart { start }),
                Action::Initiate { owner, slot_start, .. } => self.push(slot_start, i, Ev::SlotStart { owner }),
                Action::EnterStandby { until } => {
                    let n = &mut self.nodes[i];
                    n.gen += 1;
                    n.ble.truncate_after(now);
                    n.uwb.truncate_after(now);
                    n.last_scan = None;
                    n.window = None;
                    n.standby_since = Some(now);
                    self.push(until, i, Ev::StandbyEnd);
                }
                Action::CheckScan { start } => {
                    let n = &mut self.nodes[i];
                    let scan = ScanWindow { start, end: start + n.cfg.scan_length, channel: Channel::for_epoch(n.epochs) };
                    n.last_scan = Some(scan);
                    n.ble.push(scan.start, scan.end, EnergyState::BleScan);
                    n.scans += 1;
                    let gen = n.gen;
                    self.push(scan.end, i, Ev::CheckScanEnd { gen });
                }
                Action::Resume { at } => {
                    self.nodes[i].gen += 1;
                    let gen = self.nodes[i].gen;
                    self.push(at, i, Ev::EpochStart { gen });
                }
            }
        }
    }

    fn window_start(&mut self, i: usize, start: Instant) {
        let n = &mut self.nodes[i];
        if n.state.mode != Mode::Active || n.state.next_window_start != Some(start) {
            return;
        }
        let slots = n.state.bitmap.count() as u64;
        let end = start + n.cfg.slot * slots;
        if slots > 0 {
            n.uwb.push(start.saturating_sub(n.cfg.uwb_wakeup), start, EnergyState::UwbWake);
            n.uwb.push(start, end, EnergyState::UwbActive);
            n.window = Some((start, end));
        }
        self.push(end, i, Ev::WindowEnd { start });
    }

    fn slot_start(&mut self, i: usize, owner_addr: NodeAddress) {
        let now = self.now;
        if self.nodes[i].state.mode != Mode::Active {
            return;
        }
        let Some(&o) = self.by_addr.get(&owner_addr) else { return };
        let me = self.nodes[i].address;
        let claim = self.claims.entry((owner_addr, now)).or_default();
        claim.push(me);
        if claim.len() == 2 {
            self.out.slot_collisions.push(SlotCollision { time: now, owner: owner_addr, initiators: claim.clone() });
        }
        if self.claims.len() > 4096 {
            let horizon = now.saturating_sub(Span::from_secs(1));
            self.claims.retain(|k, _| k.1 >= horizon);
        }

        let cfg = &self.nodes[i].cfg;
        let (reply, wakeup) = (cfg.reply_delay, cfg.uwb_wakeup);
        let air = self.phy.uwb_frame_airtime;
        let t1 = self.nodes[i].state.poll_time(owner_addr, now);
        let (pi, po) = (self.nodes[i].pos(t1), self.nodes[o].pos(t1));
        let d = distance(pi, po);
        let noise = uwb_noise(self.phy, &mut self.nodes[i].rng);
        let tof = Span::from_nanos((d / self.phy.speed_of_light * 1e9).round() as u64);
        let t3 = t1 + tof + reply;
        let done = t3 + air + tof;

        let n = &mut self.nodes[i];
        n.uwb.push(now.saturating_sub(wakeup), now, EnergyState::UwbWake);
        n.uwb.push(now, done, EnergyState::UwbActive);
        n.rangings += 1;

        let poll_id = self.id();
        let frame = Transmission { id: poll_id, tx: me, pos: pi, start: t1, end: t1 + air, channel: None };
        self.uwb.register(frame);
        let ex = self.id();
        self.exchanges.insert(ex, Exchange { initiator: i, owner: o, t1, poll_id, resp_id: None, t3, true_distance: d, noise });
        self.push(t1 + air, i, Ev::PollEnd { ex });
    }

    fn poll_end(&mut self, ex_id: u64) {
        let now = self.now;
        let Some(ex) = self.exchanges.get(&ex_id) else { return };
        let (i, o, t1, t3, d) = (ex.initiator, ex.owner, ex.t1, ex.t3, ex.true_distance);
        let poll = self.uwb.get(ex.poll_id).cloned().expect("poll frame live");
        let owner = &self.nodes[o];
        let listening = owner.state.mode == Mode::Active && owner.window.is_some_and(|(s, e)| s <= poll.start && poll.end <= e);
        let ok = listening
            && d <= self.phy.uwb_range_m
            && self.uwb.clear_at(&poll, owner.address, owner.pos(now))
            && !self.lost(o);
        if !ok {
            self.fail(ex_id, i, o, t1);
            return;
        }
        let resp_id = self.id();
        let air = self.phy.uwb_frame_airtime;
        let frame = Transmission { id: resp_id, tx: self.nodes[o].address, pos: self.nodes[o].pos(t3), start: t3, end: t3 + air, channel: None };
        self.uwb.register(frame);
        self.exchanges.get_mut(&ex_id).expect("exchange").resp_id = Some(resp_id);
        self.push(t3 + air, i, Ev::RespEnd { ex: ex_id });
    }

    fn resp_end(&mut self, ex_id: u64) {
        let now = self.now;
        let Some(ex) = self.exchanges.remove(&ex_id) else { return };
        let resp = self.uwb.get(ex.resp_id.expect("response sent")).cloned().expect("response live");
        let (i, o) = (ex.initiator, ex.owner);
        let ok = self.uwb.clear_at(&resp, self.nodes[i].address, self.nodes[i].pos(now)) && !self.lost(i);
        self.uwb.prune(now.saturating_sub(Span::from_millis(2)));
        if !ok {
            self.out.ranges.push(self.sample(i, o, ex.t1, 0.0, false));
            return;
        }
        let reply = self.nodes[o].cfg.reply_delay;
        let measured = measured_distance(ex.true_distance + ex.noise, reply, self.nodes[i].drift, self.nodes[o].drift, self.phy);
        let sample = self.sample(i, o, ex.t1, measured, true);
        self.out.ranges.push(sample);
        let n = &mut self.nodes[i];
        self.out.events.push(EngineEvent {
            time: ex.t1,
            node: n.address,
            kind: EventKind::Range,
            details: format!("peer={} distance_m={measured:.3}", sample.responder),
        });
        n.state.alert_check(&sample, &mut self.out.events);
    }

    fn fail(&mut self, ex_id: u64, i: usize, o: usize, t1: Instant) {
        self.exchanges.remove(&ex_id);
        self.out.ranges.push(self.sample(i, o, t1, 0.0, false));
    }

    fn sample(&self, i: usize, o: usize, t: Instant, d: f64, success: bool) -> RangeSample {
        RangeSample { initiator: self.nodes[i].address, responder: self.nodes[o].address, distance_m: d, time: t, success }
    }

    fn finish(mut self) -> SimOutput {
        let end = self.end;
        for n in &mut self.nodes {
            if let Some(since) = n.standby_since.take() {
                n.off += end - since;
            }
            if n.boot >= end {
                continue;
            }
            let mut ledger = EnergyLedger { elapsed: end - n.boot, ..Default::default() };
            let ble = n.ble.resolve(n.boot, end, &[EnergyState::BleAdvTx, EnergyState::BleScan]);
            let uwb = n.uwb.resolve(n.boot, end, &[EnergyState::UwbActive, EnergyState::UwbWake]);
            let mut awake = Span::ZERO;
            for (s, d) in ble.into_iter().chain(uwb.clone()) {
                ledger.add(s, d);
            }
            for d in uwb.values() {
                awake += *d;
            }
            ledger.add(EnergyState::UwbDeepsleep, ledger.elapsed.saturating_sub(awake).saturating_sub(n.off));
            ledger.rangings = n.rangings;
            ledger.advertisements = n.advertisements;
            ledger.scans = n.scans;
            self.out.energy.insert(n.address, ledger);
            self.out.final_indexes.insert(n.address, n.state.my_index);
        }
        self.out.ranges.sort_by_key(|s| (s.time, s.initiator, s.responder));
        self.out.events.sort_by_key(|e| e.time);
        self.out.duration = end - Instant::ZERO;
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LatencyClass;

    fn two_nodes(seed: u64) -> Scenario {
        let mut a = static_node(1, 0.0, 0.0);
        let mut b = static_node(2, 2.0, 0.0);
        a.boot_offset_us = Some(0);
        b.boot_offset_us = Some(700_000);
        Scenario {
            duration: Span::from_secs(60),
            seed,
            phy: PhyConfig::default(),
            preset: Some(LatencyClass::TwoSeconds),
            protocol: None,
            nodes: vec![a, b],
        }
    }

    #[test]
    fn pair_discovers_and_ranges() {
        let out = run(&two_nodes(1)).unwrap();
        assert_eq!(out.latency.len(), 2);
        for l in &out.latency {
            assert!(l.discovered - l.since <= Span::from_secs(4), "{l:?}");
        }
        for (a, b) in [(1, 2), (2, 1)] {
            let n = out
                .ranges
                .iter()
                .filter(|s| s.success && s.initiator == NodeAddress::from_u64(a) && s.responder == NodeAddress::from_u64(b))
                .count();
            assert!(n >= 25, "{a}->{b}: {n}");
        }
        assert!(out.ranges.iter().filter(|s| s.success).all(|s| (s.distance_m - 2.0).abs() < 0.3));
        assert!(out.slot_collisions.is_empty());
    }

    #[test]
    fn lonely_node_never_ranges() {
        let mut s = two_nodes(1);
        s.nodes.truncate(1);
        let out = run(&s).unwrap();
        assert!(out.ranges.is_empty());
        let l = &out.energy[&NodeAddress::from_u64(1)];
        assert_eq!(l.duration(EnergyState::UwbActive), Span::ZERO);
        assert_eq!(l.duration(EnergyState::UwbWake), Span::ZERO);
        assert_eq!(l.rangings, 0);
    }

    #[test]
    fn ledger_partitions_time() {
        let out = run(&two_nodes(3)).unwrap();
        for l in out.energy.values() {
            let uwb = l.duration(EnergyState::UwbActive) + l.duration(EnergyState::UwbWake) + l.duration(EnergyState::UwbDeepsleep);
            assert_eq!(uwb, l.elapsed);
            let ble = l.duration(EnergyState::BleScan) + l.duration(EnergyState::BleAdvTx);
            assert!(ble <= l.elapsed);
        }
    }

    #[test]
    fn identical_runs() {
        let a = run(&two_nodes(5)).unwrap();
        let b = run(&two_nodes(5)).unwrap();
        assert_eq!(a, b);
    }
}
