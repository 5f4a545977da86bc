//! Fits the free state currents to measured system-level averages.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LatencyClass, PhyConfig};
use crate::sim::{run, static_node, Scenario};
use crate::time::Span;

use super::{CurrentTable, EnergyError, EnergyLedger, EnergyState};

/// One measured configuration: a tag with `neighbors` tags continuously in range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCase {
    pub name: &'static str,
    pub neighbors: usize,
    pub class: LatencyClass,
    pub target_ma: f64,
}

pub const REFERENCE_TARGETS_MA: [ReferenceCase; 6] = [
    ReferenceCase { name: "alone_2s", neighbors: 0, class: LatencyClass::TwoSeconds, target_ma: 1.88 },
    ReferenceCase { name: "alone_30s", neighbors: 0, class: LatencyClass::ThirtySeconds, target_ma: 0.95 },
    ReferenceCase { name: "one_neighbor_2s", neighbors: 1, class: LatencyClass::TwoSeconds, target_ma: 2.33 },
    ReferenceCase { name: "one_neighbor_30s", neighbors: 1, class: LatencyClass::ThirtySeconds, target_ma: 0.985 },
    ReferenceCase { name: "nine_neighbors_2s", neighbors: 9, class: LatencyClass::TwoSeconds, target_ma: 5.28 },
    ReferenceCase { name: "nine_neighbors_30s", neighbors: 9, class: LatencyClass::ThirtySeconds, target_ma: 1.2 },
];

const REFERENCE_DURATION: Span = Span::from_secs(15 * 60);
const REFERENCE_SEED: u64 = 2021;

/// Fraction of time per radio state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycles {
    pub ble_scan: f64,
    pub ble_adv_tx: f64,
    pub uwb_active: f64,
    pub uwb_wake: f64,
    pub uwb_deepsleep: f64,
}

impl DutyCycles {
    pub fn from_ledger(l: &EnergyLedger) -> Self {
        DutyCycles {
            ble_scan: l.duty(EnergyState::BleScan),
            ble_adv_tx: l.duty(EnergyState::BleAdvTx),
            uwb_active: l.duty(EnergyState::UwbActive),
            uwb_wake: l.duty(EnergyState::UwbWake),
            uwb_deepsleep: l.duty(EnergyState::UwbDeepsleep),
        }
    }

    fn free(&self) -> [f64; 4] {
        [self.ble_scan, self.ble_adv_tx, self.uwb_active, self.uwb_wake]
    }

    pub fn modelled(&self, t: &CurrentTable) -> f64 {
        t.baseline_ma
            + self.ble_scan * t.ble_scan_ma
            + self.ble_adv_tx * t.ble_adv_tx_ma
            + self.uwb_active * t.uwb_active_ma
            + self.uwb_wake * t.uwb_wake_ma
            + self.uwb_deepsleep * t.uwb_deepsleep_ma
    }
}

/// The measured tag plus `neighbors` tags on a 1.5 m circle around it.
pub fn reference_scenario(neighbors: usize, class: LatencyClass, duration: Span, seed: u64) -> Scenario {
    let mut nodes = vec![static_node(1, 0.0, 0.0)];
    for k in 0..neighbors {
        let a = k as f64 * std::f64::consts::TAU / neighbors as f64;
        nodes.push(static_node(2 + k as u64, 1.5 * a.cos(), 1.5 * a.sin()));
    }
    Scenario { duration, seed, phy: PhyConfig::default(), preset: Some(class), protocol: None, nodes }
}

/// Duty cycles of the six reference cases, averaged over all tags of each run.
pub fn reference_duty_cycles() -> Vec<(ReferenceCase, DutyCycles)> {
    REFERENCE_TARGETS_MA
        .par_iter()
        .map(|case| {
            let s = reference_scenario(case.neighbors, case.class, REFERENCE_DURATION, REFERENCE_SEED);
            let out = run(&s).expect("reference scenario is valid");
            let mut total = EnergyLedger::default();
            for l in out.energy.values() {
                total.merge(l);
            }
            (*case, DutyCycles::from_ledger(&total))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub case: String,
    pub target_ma: f64,
    pub modelled_ma: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub table: CurrentTable,
    pub rows: Vec<CalibrationRow>,
    pub residual_sum_squares: f64,
}

impl CalibrationReport {
    pub fn worst(&self) -> Option<&CalibrationRow> {
        self.rows.iter().max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }
}

pub fn residual_sum_squares(table: &CurrentTable, cases: &[(ReferenceCase, DutyCycles)]) -> f64 {
    cases.iter().map(|(c, d)| (d.modelled(table) - c.target_ma).powi(2)).sum()
}

/// Non-negative least squares over the four free currents with BASELINE and
/// UWB_DEEPSLEEP fixed. Fails unless every case lands within 10% of target.
pub fn calibrate(cases: &[(ReferenceCase, DutyCycles)], baseline_ma: f64) -> Result<CalibrationReport, EnergyError> {
    let fixed = CurrentTable::floor_only(baseline_ma);
    let a = DMatrix::from_fn(cases.len(), 4, |r, c| cases[r].1.free()[c]);
    let b = DVector::from_iterator(cases.len(), cases.iter().map(|(c, d)| c.target_ma - d.modelled(&fixed)));

    let mut best: Option<(f64, [f64; 4])> = None;
    for mask in 0u32..16 {
        let cols: Vec<usize> = (0..4).filter(|c| mask & (1 << c) != 0).collect();
        let mut x = [0.0; 4];
        if !cols.is_empty() {
            let sub = a.select_columns(&cols);
            let Ok(sol) = sub.svd(true, true).solve(&b, 1e-12) else { continue };
            if sol.iter().any(|v| *v < 0.0) {
                continue;
            }
            for (k, &c) in cols.iter().enumerate() {
                x[c] = sol[k];
            }
        }
        let r = (&a * DVector::from_row_slice(&x) - &b).norm_squared();
        if best.is_none_or(|(br, _)| r < br) {
            best = Some((r, x));
        }
    }
    let (_, x) = best.expect("the empty subset is always feasible");
    let table = CurrentTable { ble_scan_ma: x[0], ble_adv_tx_ma: x[1], uwb_active_ma: x[2], uwb_wake_ma: x[3], ..fixed };

    let rows: Vec<CalibrationRow> = cases
        .iter()
        .map(|(c, d)| {
            let m = d.modelled(&table);
            CalibrationRow {
                case: c.name.to_string(),
                target_ma: c.target_ma,
                modelled_ma: m,
                relative_error: (m - c.target_ma).abs() / c.target_ma,
            }
        })
        .collect();
    let report = CalibrationReport { table, residual_sum_squares: residual_sum_squares(&table, cases), rows };
    let worst = report.worst().expect("at least one case");
    if worst.relative_error > 0.10 {
        return Err(EnergyError::CalibrationInfeasible { case: worst.case.clone(), worst: worst.relative_error });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(table: &CurrentTable) -> Vec<(ReferenceCase, DutyCycles)> {
        let duties = [
            [0.09, 0.03, 0.0, 0.0],
            [0.013, 0.0135, 0.0, 0.0],
            [0.09, 0.03, 0.0023, 0.0055],
            [0.013, 0.0135, 0.00015, 0.00037],
            [0.09, 0.03, 0.021, 0.0275],
            [0.013, 0.0135, 0.0014, 0.0018],
        ];
        REFERENCE_TARGETS_MA
            .iter()
            .zip(duties)
            .map(|(c, f)| {
                let d = DutyCycles { ble_scan: f[0], ble_adv_tx: f[1], uwb_active: f[2], uwb_wake: f[3], uwb_deepsleep: 1.0 - f[2] - f[3] };
                (ReferenceCase { target_ma: d.modelled(table), ..*c }, d)
            })
            .collect()
    }

    #[test]
    fn recovers_a_consistent_table() {
        let truth = CurrentTable { ble_scan_ma: 10.0, ble_adv_tx_ma: 7.0, uwb_active_ma: 120.0, uwb_wake_ma: 30.0, ..CurrentTable::floor_only(0.72) };
        let report = calibrate(&synthetic(&truth), 0.72).unwrap();
        assert!((report.table.ble_scan_ma - 10.0).abs() < 1e-6);
        assert!((report.table.uwb_active_ma - 120.0).abs() < 1e-4);
        assert!(report.residual_sum_squares < 1e-12);
    }

    #[test]
    fn alone_cases_fix_the_ble_share() {
        let truth = CurrentTable { ble_scan_ma: 10.0, ble_adv_tx_ma: 7.0, uwb_active_ma: 120.0, uwb_wake_ma: 30.0, ..CurrentTable::floor_only(0.72) };
        let cases = synthetic(&truth);
        let report = calibrate(&cases, 0.72).unwrap();
        for (c, d) in cases.iter().filter(|(c, _)| c.neighbors == 0) {
            let ble = d.ble_scan * report.table.ble_scan_ma + d.ble_adv_tx * report.table.ble_adv_tx_ma;
            let expected = c.target_ma - 0.72 - d.uwb_deepsleep * report.table.uwb_deepsleep_ma;
            assert!((ble - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn never_negative_and_beats_zero() {
        let mut cases = synthetic(&CurrentTable::default());
        cases[0].0.target_ma = 0.5;
        let fixed = CurrentTable::floor_only(0.72);
        match calibrate(&cases, 0.72) {
            Ok(r) => {
                assert!(r.table.is_valid());
                assert!(r.residual_sum_squares < residual_sum_squares(&fixed, &cases));
            }
            Err(EnergyError::CalibrationInfeasible { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn raised_floor_is_infeasible() {
        let cases = synthetic(&CurrentTable::default());
        assert!(matches!(calibrate(&cases, 2.0), Err(EnergyError::CalibrationInfeasible { .. })));
    }
}
