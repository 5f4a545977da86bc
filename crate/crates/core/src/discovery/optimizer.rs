//! Picks scan length and advertisement interval for a latency target by
//! Monte Carlo estimation of one-epoch discovery probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProtocolConfig;
use crate::time::{micros, Span};

const TRIALS: u32 = 10_000;
const EARLY_TRIALS: u32 = 500;
const TARGET_PROBABILITY: f64 = 0.95;
const SEED: u64 = 0x0B1E_2D15_C0FE;
const STEP: Span = Span::from_millis(5);
const INTERVAL_STEPS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizeError {
    #[error("target latency must be at least 1 s")]
    LatencyTooShort,
    #[error("density must be at least 1")]
    ZeroDensity,
    #[error("no (L, A) pair reaches the discovery target")]
    Infeasible,
}

/// Radio constants the Monte Carlo model needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryModel {
    pub adv_duration: Span,
    pub packet_gap: Span,
    pub packet_airtime: Span,
}

impl Default for DiscoveryModel {
    fn default() -> Self {
        DiscoveryModel {
            adv_duration: Span::from_millis(5),
            packet_gap: Span::from_micros(400),
            packet_airtime: Span::from_micros(304),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedSchedule {
    #[serde(with = "micros")]
    pub epoch: Span,
    #[serde(with = "micros")]
    pub scan_length: Span,
    #[serde(with = "micros")]
    pub adv_interval: Span,
    pub duty_cycle: f64,
    pub discovery_probability: f64,
}

impl OptimizedSchedule {
    /// `base` with the optimized discovery timing (and `U = E`, `J = 5% of U`).
    pub fn apply(&self, base: &ProtocolConfig) -> ProtocolConfig {
        ProtocolConfig {
            epoch: self.epoch,
            scan_length: self.scan_length,
            adv_interval: self.adv_interval,
            ranging_period: self.epoch,
            jitter: Span::from_nanos(self.epoch.as_nanos() / 20),
            ..base.clone()
        }
    }
}

struct Candidate {
    scan: i64,
    interval: i64,
    count: i64,
    duty: f64,
}

/// Minimum-duty `(L, A)` whose one-epoch discovery probability reaches 0.95
/// among `density` neighbors.
pub fn optimize(target_latency: Span, density: u32) -> Result<OptimizedSchedule, OptimizeError> {
    optimize_with(&DiscoveryModel::default(), target_latency, density)
}

pub fn optimize_with(
    model: &DiscoveryModel,
    target_latency: Span,
    density: u32,
) -> Result<OptimizedSchedule, OptimizeError> {
    if target_latency < Span::from_secs(1) {
        return Err(OptimizeError::LatencyTooShort);
    }
    if density == 0 {
        return Err(OptimizeError::ZeroDensity);
    }
    let epoch = target_latency.as_nanos() as i64;
    let b = model.adv_duration.as_nanos() as i64;
    let step = STEP.as_nanos() as i64;

    let mut candidates = Vec::new();
    let mut scan = 2 * b;
    while scan <= epoch / 4 {
        for k in 0..=INTERVAL_STEPS as i64 {
            let interval = scan - b - k * step;
            if interval < b {
                break;
            }
            let count = (epoch - scan - b) / interval + 1;
            let duty = (scan + count * b) as f64 / epoch as f64;
            candidates.push(Candidate { scan, interval, count, duty });
        }
        scan += step;
    }
    candidates.sort_by(|x, y| x.duty.total_cmp(&y.duty).then(x.scan.cmp(&y.scan)));

    for c in &candidates {
        if let Some(p) = estimate(model, epoch, c, density) {
            return Ok(OptimizedSchedule {
                epoch: target_latency,
                scan_length: Span::from_nanos(c.scan as u64),
                adv_interval: Span::from_nanos(c.interval as u64),
                duty_cycle: c.duty,
                discovery_probability: p,
            });
        }
    }
    Err(OptimizeError::Infeasible)
}

/// Probability estimate for one candidate, or `None` once it is clearly below target.
fn estimate(model: &DiscoveryModel, epoch: i64, c: &Candidate, density: u32) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut hits = 0u32;
    for trial in 1..=TRIALS {
        if discovered_once(model, epoch, c, density, &mut rng) {
            hits += 1;
        }
        if trial == EARLY_TRIALS && (hits as f64) < 0.9 * EARLY_TRIALS as f64 {
            return None;
        }
    }
    let p = hits as f64 / TRIALS as f64;
    (p >= TARGET_PROBABILITY).then_some(p)
}

/// One trial: a scanner at time 0 listens on a random channel for L; does it
/// receive an intact packet of the target?
fn discovered_once(model: &DiscoveryModel, epoch: i64, c: &Candidate, density: u32, rng: &mut ChaCha8Rng) -> bool {
    let air = model.packet_airtime.as_nanos() as i64;
    let offset = rng.random_range(0..3i64) * model.packet_gap.as_nanos() as i64;
    let target_phase = rng.random_range(0..epoch);
    let interferers: Vec<i64> = (1..density).map(|_| rng.random_range(0..epoch)).collect();

    for wrap in 0..2 {
        let base = target_phase + c.scan + offset - wrap * epoch;
        let lo = ceil_div(-base, c.interval).max(0);
        let hi = floor_div(c.scan - air - base, c.interval).min(c.count - 1);
        for i in lo..=hi {
            let start = base + i * c.interval;
            let clear = interferers.iter().all(|&phase| !overlaps(start, phase + c.scan + offset, epoch, c, air));
            if clear {
                return true;
            }
        }
    }
    false
}

fn overlaps(packet: i64, first: i64, epoch: i64, c: &Candidate, air: i64) -> bool {
    (0..3).any(|wrap| {
        let rel = packet - first + wrap * epoch;
        let i = floor_div(rel, c.interval);
        [i, i + 1]
            .into_iter()
            .filter(|&j| (0..c.count).contains(&j))
            .any(|j| (rel - j * c.interval).abs() < air)
    })
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}
