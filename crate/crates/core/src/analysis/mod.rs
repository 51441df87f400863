//! Detectors and run statistics computed from record streams alone, so they
//! behave the same on live telemetry, replayed logs and radio output.

pub mod detectors;
pub mod export;
pub mod summary;

use serde::Serialize;
use thiserror::Error;

use crate::encoder::{rpm_to_kmh, DEFAULT_WHEEL_DIAMETER_M};
use crate::record::{wheel, TelemetryRecord};

pub use detectors::{
    detect_all, detect_crash, detect_diff_failure, detect_thermal, CrashConfig, CrashDetector, DiffFailureConfig,
    DiffFailureDetector, ThermalDetector,
};
pub use export::{export_csv, CSV_COLUMNS};
pub use summary::{
    compare_runs, lap_segmentation, steering_correction_stats, straight_mask, summarize, AnalysisConfig,
    Comparison, CorrectionStats, LapBoundary, RunSummary, SummaryDelta, WheelDiffStats,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("runs are not comparable: tick rates {a} Hz and {b} Hz")]
    IncomparableRuns { a: u16, b: u16 },
    #[error("no valid GPS fix in the log")]
    NoGps,
    #[error("mask has {mask} entries for {records} records")]
    MaskLength { mask: usize, records: usize },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    DiffFailure,
    Crash,
    ThermalCritical,
    BatteryLow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventDetail {
    /// Normalised front-minus-rear wheel speed when the detector fired.
    WheelDifference { normalized: f64 },
    Tumbles { count: u32 },
    TemperatureShift { sensor: usize, spread_c: f64 },
    Voltage { volts: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub kind: EventKind,
    pub t_ms: u64,
    pub detail: EventDetail,
}

impl DetectionEvent {
    /// Events that should fail a scripted regression gate.
    pub fn is_critical(&self) -> bool {
        !matches!(self.kind, EventKind::BatteryLow)
    }
}

/// Wheel speeds in km/h, FL FR RL RR.
pub fn wheel_kmh(rec: &TelemetryRecord, wheel_diameter_m: f64) -> [f64; 4] {
    rec.wheel_speed_rpm.map(|rpm| rpm_to_kmh(rpm as f64, wheel_diameter_m))
}

/// `(left − right) / mean` and `(front − rear) / mean`; zero when the
/// wheels are (almost) still.
pub fn wheel_differences(rec: &TelemetryRecord) -> (f64, f64) {
    let w = rec.wheel_speed_rpm.map(|v| v as f64);
    let mean = w.iter().sum::<f64>() / 4.0;
    if mean.abs() < 1e-6 {
        return (0.0, 0.0);
    }
    let left = (w[wheel::FL] + w[wheel::RL]) / 2.0;
    let right = (w[wheel::FR] + w[wheel::RR]) / 2.0;
    let front = (w[wheel::FL] + w[wheel::FR]) / 2.0;
    let rear = (w[wheel::RL] + w[wheel::RR]) / 2.0;
    ((left - right) / mean, (front - rear) / mean)
}

/// Mean wheel speed in km/h with the default wheel.
pub fn mean_speed_kmh(rec: &TelemetryRecord) -> f64 {
    wheel_kmh(rec, DEFAULT_WHEEL_DIAMETER_M).iter().sum::<f64>() / 4.0
}

fn wrap_deg180(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w <= -180.0 {
        w + 360.0
    } else {
        w
    }
}

/// Yaw rate in rad/s between consecutive records, from their yaw angles.
/// The first record has no predecessor and gets zero.
pub fn yaw_rates(records: &[TelemetryRecord]) -> Vec<f64> {
    let mut out = Vec::with_capacity(records.len());
    let mut prev: Option<&TelemetryRecord> = None;
    for r in records {
        out.push(match prev {
            Some(p) => yaw_rate_between(p, r),
            None => 0.0,
        });
        prev = Some(r);
    }
    out
}

pub fn yaw_rate_between(prev: &TelemetryRecord, cur: &TelemetryRecord) -> f64 {
    let dt = cur.timestamp_ms.saturating_sub(prev.timestamp_ms) as f64 / 1000.0;
    if dt <= 0.0 {
        return 0.0;
    }
    wrap_deg180(cur.euler_deg[0] as f64 - prev.euler_deg[0] as f64).to_radians() / dt
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn rec(seq: u32) -> TelemetryRecord {
        TelemetryRecord {
            seq,
            timestamp_ms: (seq as u64 + 1) * 100,
            servo_pwm_us: 1500,
            throttle_pwm_us: 1500,
            quat: [1.0, 0.0, 0.0, 0.0],
            temps_c: [20.0; 4],
            rail_v: [16.0, 5.1, 3.3],
            ..Default::default()
        }
    }

    #[test]
    fn differences_sign() {
        let mut r = rec(0);
        r.wheel_speed_rpm = [110.0, 90.0, 110.0, 90.0];
        let (lr, fr) = wheel_differences(&r);
        assert!((lr - 0.2).abs() < 1e-9);
        assert_eq!(fr, 0.0);
        r.wheel_speed_rpm = [0.0; 4];
        assert_eq!(wheel_differences(&r), (0.0, 0.0));
    }

    #[test]
    fn yaw_rate_wraps() {
        let mut a = rec(0);
        let mut b = rec(1);
        a.euler_deg[0] = 179.0;
        b.euler_deg[0] = -179.0;
        let r = yaw_rate_between(&a, &b);
        assert!((r - 2f64.to_radians() / 0.1).abs() < 1e-6);
    }
}
