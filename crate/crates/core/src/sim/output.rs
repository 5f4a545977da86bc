//! Simulation results and their CSV/JSON serialization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{NodeAddress, NodeIndex};
use crate::energy::{write_energy_report, Battery, CurrentTable, EnergyLedger};
use crate::engine::EngineEvent;
use crate::ranging::RangeSample;
use crate::time::{Instant, Span};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiSample {
    pub time: Instant,
    pub receiver: NodeAddress,
    pub sender: NodeAddress,
    pub rssi_dbm: f64,
    pub distance_m: f64,
}

/// First discovery of `neighbor` by `observer` after both were up and in range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyRecord {
    pub observer: NodeAddress,
    pub neighbor: NodeAddress,
    pub since: Instant,
    pub discovered: Instant,
}

impl LatencyRecord {
    pub fn latency(&self) -> Span {
        self.discovered.saturating_since(self.since)
    }
}

/// Two or more initiators used the same slot of the same owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotCollision {
    pub time: Instant,
    pub owner: NodeAddress,
    pub initiators: Vec<NodeAddress>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    pub duration: Span,
    pub ranges: Vec<RangeSample>,
    pub rssi: Vec<RssiSample>,
    pub events: Vec<EngineEvent>,
    pub energy: BTreeMap<NodeAddress, EnergyLedger>,
    pub latency: Vec<LatencyRecord>,
    pub slot_collisions: Vec<SlotCollision>,
    pub initial_indexes: BTreeMap<NodeAddress, NodeIndex>,
    pub final_indexes: BTreeMap<NodeAddress, NodeIndex>,
}

pub const RANGES_CSV: &str = "ranges.csv";
pub const RSSI_CSV: &str = "rssi.csv";
pub const EVENTS_CSV: &str = "events.csv";
pub const ENERGY_CSV: &str = "energy.csv";
pub const LATENCY_CSV: &str = "latency.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

pub fn write_ranges<W: Write>(w: W, ranges: &[RangeSample]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["initiator", "responder", "distance_m", "time_us", "success"])?;
    for s in ranges {
        wtr.write_record([
            s.initiator.to_string(),
            s.responder.to_string(),
            format!("{:.3}", s.distance_m),
            s.time.as_micros().to_string(),
            s.success.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rssi<W: Write>(w: W, rssi: &[RssiSample]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time_us", "receiver", "sender", "rssi_dbm", "distance_m"])?;
    for s in rssi {
        wtr.write_record([
            s.time.as_micros().to_string(),
            s.receiver.to_string(),
            s.sender.to_string(),
            format!("{:.2}", s.rssi_dbm),
            format!("{:.3}", s.distance_m),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(w: W, events: &[EngineEvent]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time_us", "node", "event_type", "details"])?;
    for e in events {
        wtr.write_record([e.time.as_micros().to_string(), e.node.to_string(), e.kind.to_string(), e.details.clone()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_latency<W: Write>(w: W, records: &[LatencyRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["observer", "neighbor", "since_us", "discovered_us", "latency_us"])?;
    for r in records {
        wtr.write_record([
            r.observer.to_string(),
            r.neighbor.to_string(),
            r.since.as_micros().to_string(),
            r.discovered.as_micros().to_string(),
            r.latency().as_micros().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: String,
    pub seed: u64,
    /// sha256 over the scenario bytes, the seed and the current table.
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
}

/// Hash of every input that affects the output.
pub fn input_hash(scenario_bytes: &[u8], seed: u64, table: &CurrentTable) -> String {
    let mut h = Sha256::new();
    h.update(scenario_bytes);
    h.update(seed.to_le_bytes());
    h.update(serde_json::to_vec(table).expect("table serializes"));
    hex::encode(h.finalize())
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

impl SimOutput {
    /// Writes the five CSV streams into `dir` and returns their names and hashes.
    pub fn write_csvs(&self, dir: &Path, table: &CurrentTable, battery: Battery) -> io::Result<Vec<OutputFile>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut emit = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> csv::Result<()>| -> io::Result<()> {
            let mut buf = Vec::new();
            f(&mut buf).map_err(csv_err)?;
            let mut out = BufWriter::new(File::create(dir.join(name))?);
            out.write_all(&buf)?;
            out.flush()?;
            files.push(OutputFile { name: name.to_string(), sha256: hex::encode(Sha256::digest(&buf)) });
            Ok(())
        };
        emit(RANGES_CSV, &|b| write_ranges(b, &self.ranges))?;
        emit(RSSI_CSV, &|b| write_rssi(b, &self.rssi))?;
        emit(EVENTS_CSV, &|b| write_events(b, &self.events))?;
        emit(ENERGY_CSV, &|b| write_energy_report(b, &self.energy, table, battery))?;
        emit(LATENCY_CSV, &|b| write_latency(b, &self.latency))?;
        Ok(files)
    }
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
    std::fs::write(dir.join(MANIFEST_JSON), text + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_rows() {
        let s = RangeSample {
            initiator: NodeAddress::from_u64(1),
            responder: NodeAddress::from_u64(2),
            distance_m: 1.23456,
            time: Instant::from_micros(42),
            success: true,
        };
        let mut buf = Vec::new();
        write_ranges(&mut buf, &[s]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "initiator,responder,distance_m,time_us,success\n00:00:00:00:00:01,00:00:00:00:00:02,1.235,42,true\n"
        );
    }

    #[test]
    fn input_hash_avalanche() {
        let base = br#"{"duration_us": 1000000, "seed": 1, "nodes": []}"#.to_vec();
        let table = CurrentTable::default();
        let h0 = input_hash(&base, 1, &table);
        assert_ne!(h0, input_hash(&base, 2, &table));
        for k in 0..100 {
            let mut m = base.clone();
            let pos = k % m.len();
            m[pos] = m[pos].wrapping_add(1 + (k / m.len()) as u8);
            assert_ne!(input_hash(&m, 1, &table), h0, "mutation {k}");
        }
    }
}
