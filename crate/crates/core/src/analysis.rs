//! Offline contact analytics over range samples: contact extraction, risk
//! classes, per-dyad totals and exposure histograms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::config::NodeAddress;
use crate::time::{Instant, Span};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("distance bands overlap or are unordered: [{0}, {1}) then [{2}, {3})")]
    BandOverlap(f64, f64, f64, f64),
    #[error("empty distance band [{0}, {1})")]
    EmptyBand(f64, f64),
    #[error("row {row}: {reason}")]
    MalformedRow { row: u64, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Unordered node pair, stored with the smaller address first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pair {
    pub a: NodeAddress,
    pub b: NodeAddress,
}

impl Pair {
    /// `None` for a node paired with itself.
    pub fn new(x: NodeAddress, y: NodeAddress) -> Option<Self> {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(Pair { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(Pair { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn contains(&self, n: NodeAddress) -> bool {
        self.a == n || self.b == n
    }

    /// The member that is not `n`.
    pub fn other(&self, n: NodeAddress) -> NodeAddress {
        if self.a == n {
            self.b
        } else {
            self.a
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub pair: Pair,
    pub distance_m: f64,
    pub time: Instant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Risk {
    High,
    Medium,
    Low,
}

impl Risk {
    pub fn as_str(self) -> &'static str {
        match self {
            Risk::High => "HIGH",
            Risk::Medium => "MEDIUM",
            Risk::Low => "LOW",
        }
    }
}

impl fmt::Display for Risk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub open_threshold_m: f64,
    /// Added to the threshold to absorb ranging error.
    pub tolerance_m: f64,
    pub close_gap: Span,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { open_threshold_m: 2.0, tolerance_m: 0.2, close_gap: Span::from_secs(90) }
    }
}

impl ContactParams {
    pub fn within(&self, distance_m: f64) -> bool {
        distance_m <= self.open_threshold_m + self.tolerance_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRecord {
    pub pair: Pair,
    pub t_open: Instant,
    /// Time of the last in-threshold sample.
    pub t_end: Instant,
    pub avg_distance_m: f64,
    pub risk: Risk,
}

impl ContactRecord {
    pub fn duration(&self) -> Span {
        self.t_end - self.t_open
    }
}

const MINUTE: Span = Span::from_secs(60);

pub fn classify(avg_distance_m: f64, duration: Span) -> Risk {
    let long = duration > MINUTE * 15;
    let mid = duration >= MINUTE * 5 && duration <= MINUTE * 15;
    if avg_distance_m < 2.0 && long {
        Risk::High
    } else if (avg_distance_m < 4.0 && mid) || (avg_distance_m >= 2.0 && avg_distance_m < 4.0 && long) {
        Risk::Medium
    } else {
        Risk::Low
    }
}

struct Open {
    t_open: Instant,
    t_last: Instant,
    sum: f64,
    count: usize,
}

impl Open {
    fn close(self, pair: Pair) -> ContactRecord {
        let avg = self.sum / self.count as f64;
        ContactRecord {
            pair,
            t_open: self.t_open,
            t_end: self.t_last,
            avg_distance_m: avg,
            risk: classify(avg, self.t_last - self.t_open),
        }
    }
}

fn extract_pair(pair: Pair, samples: &[(Instant, f64)], params: &ContactParams, out: &mut Vec<ContactRecord>) {
    let mut open: Option<Open> = None;
    for &(t, d) in samples {
        if open.as_ref().is_some_and(|o| t - o.t_last >= params.close_gap) {
            out.push(open.take().expect("checked").close(pair));
        }
        if !params.within(d) {
            continue;
        }
        match open.as_mut() {
            Some(o) => {
                o.t_last = t;
                o.sum += d;
                o.count += 1;
            }
            None => open = Some(Open { t_open: t, t_last: t, sum: d, count: 1 }),
        }
    }
    if let Some(o) = open {
        out.push(o.close(pair));
    }
}

/// Contacts of every pair present in `samples`, ordered by pair then time.
/// Input order does not matter.
pub fn extract_contacts(samples: &[Sample], params: &ContactParams) -> Vec<ContactRecord> {
    let mut by_pair: BTreeMap<Pair, Vec<(Instant, f64)>> = BTreeMap::new();
    for s in samples {
        by_pair.entry(s.pair).or_default().push((s.time, s.distance_m));
    }
    let mut out = Vec::new();
    for (pair, mut stream) in by_pair {
        stream.sort_by_key(|&(t, _)| t);
        extract_pair(pair, &stream, params, &mut out);
    }
    out
}

/// Calendar day `k` of scenario time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayWindow {
    pub start: Instant,
    pub end: Instant,
}

impl DayWindow {
    pub fn day(k: u64) -> Self {
        let day = Span::from_secs(86_400);
        DayWindow { start: Instant::ZERO + day * k, end: Instant::ZERO + day * (k + 1) }
    }

    fn clip(&self, c: &ContactRecord) -> Option<Span> {
        let s = c.t_open.max(self.start);
        let e = c.t_end.min(self.end);
        // A contact ending exactly at midnight belongs to the earlier day only.
        let touches = c.t_open < self.end && (c.t_end > self.start || c.t_open >= self.start);
        touches.then(|| e - s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DyadStat {
    pub total: Span,
    pub contacts: usize,
    /// Duration-weighted mean of the contacts' average distances.
    pub avg_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadReport {
    pub population: usize,
    pub possible: usize,
    pub dyads: BTreeMap<Pair, DyadStat>,
}

pub fn possible_dyads(population: usize) -> usize {
    population * population.saturating_sub(1) / 2
}

/// Per-dyad contact totals among `population` nodes, optionally restricted
/// to one day (contacts crossing the window edge are clipped to it).
pub fn dyad_stats(contacts: &[ContactRecord], population: usize, window: Option<DayWindow>) -> DyadReport {
    // (total, contacts, weighted sum, plain sum)
    let mut acc: BTreeMap<Pair, (Span, usize, f64, f64)> = BTreeMap::new();
    for c in contacts {
        let dur = match window {
            Some(w) => match w.clip(c) {
                Some(d) => d,
                None => continue,
            },
            None => c.duration(),
        };
        let e = acc.entry(c.pair).or_insert((Span::ZERO, 0, 0.0, 0.0));
        e.0 += dur;
        e.1 += 1;
        e.2 += dur.as_secs_f64() * c.avg_distance_m;
        e.3 += c.avg_distance_m;
    }
    let dyads = acc
        .into_iter()
        .map(|(p, (total, n, weighted, plain))| {
            // Zero-length contacts carry no weight; fall back to the plain mean.
            let avg = if total.is_zero() { plain / n as f64 } else { weighted / total.as_secs_f64() };
            (p, DyadStat { total, contacts: n, avg_distance_m: avg })
        })
        .collect();
    DyadReport { population, possible: possible_dyads(population), dyads }
}

/// Half-open distance interval [lo, hi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, d: f64) -> bool {
        self.lo <= d && d < self.hi
    }
}

pub fn default_bands() -> Vec<Band> {
    vec![Band { lo: 0.0, hi: 2.0 }, Band { lo: 2.0, hi: 4.0 }, Band { lo: 4.0, hi: f64::INFINITY }]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub user: NodeAddress,
    pub bands: Vec<Band>,
    /// Per neighbor, one total per band.
    pub totals: BTreeMap<NodeAddress, Vec<Span>>,
}

impl Exposure {
    /// Sum over all neighbors, per band.
    pub fn band_totals(&self) -> Vec<Span> {
        let mut out = vec![Span::ZERO; self.bands.len()];
        for row in self.totals.values() {
            for (o, s) in out.iter_mut().zip(row) {
                *o += *s;
            }
        }
        out
    }
}

fn check_bands(bands: &[Band]) -> Result<(), AnalysisError> {
    for b in bands {
        if !(b.lo < b.hi) {
            return Err(AnalysisError::EmptyBand(b.lo, b.hi));
        }
    }
    for w in bands.windows(2) {
        if w[0].hi > w[1].lo {
            return Err(AnalysisError::BandOverlap(w[0].lo, w[0].hi, w[1].lo, w[1].hi));
        }
    }
    Ok(())
}

/// Adds `period` per sample of `user` to the band holding its distance.
/// Samples falling in no band are ignored.
pub fn cumulative_exposure(
    samples: &[Sample],
    user: NodeAddress,
    period: Span,
    bands: &[Band],
) -> Result<Exposure, AnalysisError> {
    check_bands(bands)?;
    let mut totals: BTreeMap<NodeAddress, Vec<Span>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.pair.contains(user)) {
        let Some(k) = bands.iter().position(|b| b.contains(s.distance_m)) else { continue };
        totals.entry(s.pair.other(user)).or_insert_with(|| vec![Span::ZERO; bands.len()])[k] += period;
    }
    Ok(Exposure { user, bands: bands.to_vec(), totals })
}

/// Every node that appears in `samples`.
pub fn participants(samples: &[Sample]) -> BTreeSet<NodeAddress> {
    samples.iter().flat_map(|s| [s.pair.a, s.pair.b]).collect()
}

/// Reads a range CSV (`initiator, responder, distance_m, time_us[, success]`).
/// Rows with `success=false` are dropped. Errors name the file line.
pub fn read_samples<R: Read>(r: R) -> Result<Vec<Sample>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| AnalysisError::MalformedRow { row: 1, reason: format!("missing column {name}") };
    let ini = col("initiator").ok_or_else(|| missing("initiator"))?;
    let res = col("responder").ok_or_else(|| missing("responder"))?;
    let dist = col("distance_m").ok_or_else(|| missing("distance_m"))?;
    let time = col("time_us").ok_or_else(|| missing("time_us"))?;
    let ok = col("success");

    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    loop {
        let row = rdr.position().line();
        let more = rdr.read_record(&mut rec).map_err(|e| AnalysisError::MalformedRow { row, reason: e.to_string() })?;
        if !more {
            break;
        }
        let bad = |reason: String| AnalysisError::MalformedRow { row, reason };
        let field = |k: usize| rec.get(k).ok_or_else(|| bad(format!("missing field {}", headers.get(k).unwrap_or("?"))));
        if let Some(k) = ok {
            match field(k)? {
                "true" | "1" => {}
                "false" | "0" => continue,
                other => return Err(bad(format!("bad success value {other:?}"))),
            }
        }
        let x: NodeAddress = field(ini)?.parse().map_err(|e| bad(format!("initiator: {e}")))?;
        let y: NodeAddress = field(res)?.parse().map_err(|e| bad(format!("responder: {e}")))?;
        let d: f64 = field(dist)?.parse().map_err(|e| bad(format!("distance_m: {e}")))?;
        if !(d.is_finite() && d >= 0.0) {
            return Err(bad(format!("distance_m must be finite and non-negative, got {d}")));
        }
        let t: u64 = field(time)?.parse().map_err(|e| bad(format!("time_us: {e}")))?;
        let pair = Pair::new(x, y).ok_or_else(|| bad("initiator equals responder".into()))?;
        out.push(Sample { pair, distance_m: d, time: Instant::from_micros(t) });
    }
    Ok(out)
}

pub fn write_contacts<W: Write>(w: W, contacts: &[ContactRecord]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pair", "t_open_us", "t_end_us", "duration_s", "avg_m", "risk"])?;
    for c in contacts {
        wtr.write_record([
            c.pair.to_string(),
            c.t_open.as_micros().to_string(),
            c.t_end.as_micros().to_string(),
            format!("{:.3}", c.duration().as_secs_f64()),
            format!("{:.3}", c.avg_distance_m),
            c.risk.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per (day, dyad with contact time), plus the population summary
/// in the `possible_dyads` column.
pub fn write_dyads<W: Write>(w: W, days: &[(u64, DyadReport)]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["day", "pair", "contacts", "total_min", "avg_m", "possible_dyads"])?;
    for (day, rep) in days {
        for (pair, s) in &rep.dyads {
            wtr.write_record([
                day.to_string(),
                pair.to_string(),
                s.contacts.to_string(),
                format!("{:.3}", s.total.as_secs_f64() / 60.0),
                format!("{:.3}", s.avg_distance_m),
                rep.possible.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_exposure<W: Write>(w: W, exposures: &[Exposure]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user", "neighbor", "band_lo_m", "band_hi_m", "total_s"])?;
    for e in exposures {
        for (n, row) in &e.totals {
            for (b, s) in e.bands.iter().zip(row) {
                wtr.write_record([
                    e.user.to_string(),
                    n.to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    format!("{:.3}", s.as_secs_f64()),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Days touched by any contact.
pub fn contact_days(contacts: &[ContactRecord]) -> BTreeSet<u64> {
    let day = Span::from_secs(86_400).as_nanos();
    contacts
        .iter()
        .flat_map(|c| (c.t_open.as_nanos() / day)..=(c.t_end.as_nanos() / day))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair() -> Pair {
        Pair::new(NodeAddress::from_u64(1), NodeAddress::from_u64(2)).unwrap()
    }

    fn stream(points: &[(u64, f64)]) -> Vec<Sample> {
        points.iter().map(|&(t, d)| Sample { pair: pair(), distance_m: d, time: Instant::from_secs(t) }).collect()
    }

    /// Direct transcription of the definition: an in-threshold sample opens a
    /// contact iff no in-threshold sample precedes it within the close gap.
    fn brute_force(samples: &[Sample], p: &ContactParams) -> Vec<ContactRecord> {
        let mut s = samples.to_vec();
        s.sort_by_key(|x| x.time);
        let inside: Vec<&Sample> = s.iter().filter(|x| p.within(x.distance_m)).collect();
        let opens: Vec<usize> = (0..inside.len())
            .filter(|&i| i == 0 || inside[i].time - inside[i - 1].time >= p.close_gap)
            .collect();
        let mut out = Vec::new();
        for (k, &o) in opens.iter().enumerate() {
            let end = opens.get(k + 1).copied().unwrap_or(inside.len());
            let members = &inside[o..end];
            let avg = members.iter().map(|x| x.distance_m).sum::<f64>() / members.len() as f64;
            let (t0, t1) = (members[0].time, members[members.len() - 1].time);
            out.push(ContactRecord { pair: pair(), t_open: t0, t_end: t1, avg_distance_m: avg, risk: classify(avg, t1 - t0) });
        }
        out
    }

    #[test]
    fn empty_stream() {
        assert!(extract_contacts(&[], &ContactParams::default()).is_empty());
    }

    #[test]
    fn constant_stream_is_one_contact() {
        let s: Vec<(u64, f64)> = (0..=20).map(|k| (k * 15, 1.0)).collect();
        let c = extract_contacts(&stream(&s), &ContactParams::default());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].duration(), Span::from_secs(300));
        assert_eq!(c[0].avg_distance_m, 1.0);
    }

    #[test]
    fn long_gap_splits_contacts() {
        let mut s: Vec<(u64, f64)> = (0..=4).map(|k| (k * 15, 1.0)).collect();
        s.extend((5..=10).map(|k| (k * 15, 3.0)));
        s.push((165, 1.0));
        let c = extract_contacts(&stream(&s), &ContactParams::default());
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].t_open, c[0].t_end), (Instant::ZERO, Instant::from_secs(60)));
        assert_eq!(c[1].t_open, Instant::from_secs(165));
        assert_eq!(c, brute_force(&stream(&s), &ContactParams::default()));
    }

    #[test]
    fn tolerance_and_exact_gap() {
        let p = ContactParams::default();
        let c = extract_contacts(&stream(&[(0, 2.2), (90, 2.2)]), &p);
        assert_eq!(c.len(), 2, "a gap of exactly 90 s closes");
        assert!(extract_contacts(&stream(&[(0, 2.2001)]), &p).is_empty());
        let c = extract_contacts(&stream(&[(0, 1.0), (89, 2.0)]), &p);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn risk_examples() {
        assert_eq!(classify(1.5, MINUTE * 16), Risk::High);
        assert_eq!(classify(3.0, MINUTE * 10), Risk::Medium);
        assert_eq!(classify(1.0, MINUTE * 3), Risk::Low);
        assert_eq!(classify(1.0, MINUTE * 15), Risk::Medium);
        assert_eq!(classify(1.0, MINUTE * 5), Risk::Medium);
        assert_eq!(classify(3.0, MINUTE * 20), Risk::Medium);
        assert_eq!(classify(4.0, MINUTE * 20), Risk::Low);
    }

    #[test]
    fn dyad_worked_example() {
        let c = |open: u64, mins: u64, d: f64| ContactRecord {
            pair: pair(),
            t_open: Instant::from_secs(open),
            t_end: Instant::from_secs(open) + MINUTE * mins,
            avg_distance_m: d,
            risk: Risk::Low,
        };
        let contacts = [c(9 * 3600, 6, 1.0), c(15 * 3600, 9, 1.5)];
        let rep = dyad_stats(&contacts, 30, Some(DayWindow::day(0)));
        assert_eq!(rep.possible, 435);
        let s = rep.dyads[&pair()];
        assert_eq!(s.total, MINUTE * 15);
        assert!((s.avg_distance_m - 1.3).abs() < 1e-12);
        assert!(dyad_stats(&contacts, 30, Some(DayWindow::day(1))).dyads.is_empty());
        let none = dyad_stats(&[], 30, None);
        assert_eq!((none.dyads.len(), none.possible), (0, 435));
    }

    #[test]
    fn exposure_bands() {
        let me = NodeAddress::from_u64(1);
        let s: Vec<(u64, f64)> = (0..180).map(|k| (k * 15, 1.9)).collect();
        let e = cumulative_exposure(&stream(&s), me, Span::from_secs(15), &default_bands()).unwrap();
        assert_eq!(e.band_totals(), vec![MINUTE * 45, Span::ZERO, Span::ZERO]);

        let edge = cumulative_exposure(&stream(&[(0, 2.0)]), me, Span::from_secs(15), &default_bands()).unwrap();
        assert_eq!(edge.band_totals()[1], Span::from_secs(15));

        let empty = cumulative_exposure(&[], me, Span::from_secs(15), &default_bands()).unwrap();
        assert!(empty.band_totals().iter().all(|s| s.is_zero()));

        let bad = [Band { lo: 0.0, hi: 2.5 }, Band { lo: 2.0, hi: 4.0 }];
        assert!(matches!(cumulative_exposure(&[], me, Span::from_secs(15), &bad), Err(AnalysisError::BandOverlap(..))));
    }

    #[test]
    fn reads_rows_and_names_bad_line() {
        let text = "initiator,responder,distance_m,time_us,success\n\
                    00:00:00:00:00:01,00:00:00:00:00:02,1.500,15000000,true\n\
                    00:00:00:00:00:02,00:00:00:00:00:01,0.000,16000000,false\n\
                    00:00:00:00:00:02,00:00:00:00:00:01,abc,17000000,true\n";
        match read_samples(text.as_bytes()) {
            Err(AnalysisError::MalformedRow { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
        let ok = read_samples(&text.as_bytes()[..text.rfind("00:00:00:00:00:02,00:00:00:00:00:01,abc").unwrap()]).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(ok[0].pair, pair());
    }

    fn arb_stream() -> impl Strategy<Value = Vec<Sample>> {
        prop::collection::vec((0u64..3_000, 0.0f64..4.0), 0..200).prop_map(|v| {
            v.into_iter()
                .map(|(t, d)| Sample { pair: pair(), distance_m: (d * 10.0).round() / 10.0, time: Instant::from_secs(t) })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(s in arb_stream()) {
            let p = ContactParams::default();
            let fast = extract_contacts(&s, &p);
            let slow = brute_force(&s, &p);
            prop_assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert_eq!((a.t_open, a.t_end, a.risk), (b.t_open, b.t_end, b.risk));
                prop_assert!((a.avg_distance_m - b.avg_distance_m).abs() < 1e-9);
            }
        }

        #[test]
        fn contacts_are_disjoint_and_cover_inside_samples(s in arb_stream()) {
            let p = ContactParams::default();
            let c = extract_contacts(&s, &p);
            for w in c.windows(2) {
                prop_assert!(w[1].t_open - w[0].t_end >= p.close_gap);
            }
            for x in s.iter().filter(|x| p.within(x.distance_m)) {
                prop_assert_eq!(c.iter().filter(|k| k.t_open <= x.time && x.time <= k.t_end).count(), 1);
            }
        }

        #[test]
        fn classes_partition_the_plane(d in 0.0f64..10.0, mins in 0u64..60) {
            let r = classify(d, MINUTE * mins);
            let high = d < 2.0 && mins > 15;
            prop_assert_eq!(r == Risk::High, high);
        }

        #[test]
        fn dyad_days_add_up(opens in prop::collection::vec((0u64..3 * 86_400, 0u64..7_200), 1..20)) {
            let contacts: Vec<ContactRecord> = opens
                .iter()
                .map(|&(o, len)| ContactRecord {
                    pair: pair(),
                    t_open: Instant::from_secs(o),
                    t_end: Instant::from_secs(o + len),
                    avg_distance_m: 1.0,
                    risk: Risk::Low,
                })
                .collect();
            let all = dyad_stats(&contacts, 2, None).dyads[&pair()].total;
            let per_day: Span = (0..4).filter_map(|k| dyad_stats(&contacts, 2, Some(DayWindow::day(k))).dyads.get(&pair()).map(|s| s.total)).fold(Span::ZERO, |a, b| a + b);
            prop_assert_eq!(all, per_day);
        }
    }
}
