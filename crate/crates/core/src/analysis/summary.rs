//! Per-run statistics, lap segmentation and run comparison.

use serde::Serialize;

use crate::geo::{GeoOrigin, StartLine};
use crate::record::TelemetryRecord;
use crate::session_log::SessionLog;
use crate::sim::Track;

use super::detectors::{CrashConfig, DiffFailureConfig};
use super::{mean_speed_kmh, wheel_differences, yaw_rates, AnalysisError};

const SERVO_CENTER_US: i32 = 1500;
/// Longest plausible hop between consecutive fixes, metres.
const MAX_GPS_JUMP_M: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub diff: DiffFailureConfig,
    pub crash: CrashConfig,
    pub deadband_us: u16,
    /// Smoothed yaw rate below which a tick is on a straight, rad/s.
    pub straight_yaw_rate: f64,
    /// Width of the centred moving average applied to yaw rate, ticks.
    pub smooth_ticks: usize,
    pub start_line: StartLine,
    pub origin: GeoOrigin,
    pub lap_debounce_s: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            diff: DiffFailureConfig::default(),
            crash: CrashConfig::default(),
            deadband_us: 40,
            straight_yaw_rate: 0.1,
            smooth_ticks: 5,
            start_line: Track::builtin().start_line(),
            origin: GeoOrigin::default(),
            lap_debounce_s: 5.0,
        }
    }
}

fn smoothed_yaw_rates(records: &[TelemetryRecord], width: usize) -> Vec<f64> {
    let raw = yaw_rates(records);
    let half = width / 2;
    (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(raw.len());
            raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// True for ticks whose smoothed yaw rate marks them as driving straight.
pub fn straight_mask(records: &[TelemetryRecord], cfg: &AnalysisConfig) -> Vec<bool> {
    smoothed_yaw_rates(records, cfg.smooth_ticks)
        .into_iter()
        .map(|r| r.abs() < cfg.straight_yaw_rate)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorrectionStats {
    pub count: usize,
    /// Peak |servo − centre| of each correction, µs.
    pub peaks_us: Vec<u16>,
    /// Corrections with peaks in [deadband, 2×), [2×, 3×), [3×, 5×), ≥ 5× the deadband.
    pub histogram: [usize; 4],
}

/// Counts servo excursions beyond the deadband on masked ticks. Consecutive
/// out-of-band ticks form one correction.
pub fn steering_correction_stats(
    records: &[TelemetryRecord],
    mask: &[bool],
    deadband_us: u16,
) -> Result<CorrectionStats, AnalysisError> {
    if mask.len() != records.len() {
        return Err(AnalysisError::MaskLength { mask: mask.len(), records: records.len() });
    }
    let mut stats = CorrectionStats::default();
    let mut peak: Option<u16> = None;
    let close = |peak: &mut Option<u16>, stats: &mut CorrectionStats| {
        if let Some(p) = peak.take() {
            stats.count += 1;
            stats.peaks_us.push(p);
            let ratio = p as f64 / deadband_us.max(1) as f64;
            let bucket = if ratio < 2.0 {
                0
            } else if ratio < 3.0 {
                1
            } else if ratio < 5.0 {
                2
            } else {
                3
            };
            stats.histogram[bucket] += 1;
        }
    };
    for (r, &straight) in records.iter().zip(mask) {
        let dev = (r.servo_pwm_us as i32 - SERVO_CENTER_US).unsigned_abs() as u16;
        if straight && dev > deadband_us {
            peak = Some(peak.map_or(dev, |p| p.max(dev)));
        } else {
            close(&mut peak, &mut stats);
        }
    }
    close(&mut peak, &mut stats);
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LapBoundary {
    /// Interpolated crossing time.
    pub t_ms: u64,
    /// First record after the crossing.
    pub seq: u32,
}

/// Lap boundaries from forward crossings of the start line by the GPS track.
/// Fixes are bridged across dropouts; re-crossings within the debounce time
/// are ignored.
pub fn lap_segmentation(
    records: &[TelemetryRecord],
    start_line: &StartLine,
    origin: &GeoOrigin,
    debounce_s: f64,
) -> Result<Vec<LapBoundary>, AnalysisError> {
    let fixes: Vec<(&TelemetryRecord, (f64, f64))> = records
        .iter()
        .filter(|r| r.has_gps_fix())
        .map(|r| (r, origin.to_xy(r.gps_lat, r.gps_lon)))
        .collect();
    if fixes.is_empty() {
        return if records.is_empty() { Ok(Vec::new()) } else { Err(AnalysisError::NoGps) };
    }
    let mut out: Vec<LapBoundary> = Vec::new();
    for w in fixes.windows(2) {
        let ((r0, p0), (r1, p1)) = (w[0], w[1]);
        if (p1.0 - p0.0).hypot(p1.1 - p0.1) > MAX_GPS_JUMP_M {
            continue;
        }
        if let Some(f) = start_line.crossing(p0, p1) {
            let t = r0.timestamp_ms as f64 + f * (r1.timestamp_ms - r0.timestamp_ms) as f64;
            let t_ms = t.round() as u64;
            if let Some(last) = out.last() {
                if ((t_ms - last.t_ms) as f64) < debounce_s * 1000.0 {
                    continue;
                }
            }
            out.push(LapBoundary { t_ms, seq: r1.seq });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct WheelDiffStats {
    pub ticks: usize,
    pub mean_lr_norm: f64,
    pub mean_fr_norm: f64,
}

impl WheelDiffStats {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        if pairs.is_empty() {
            return Self::default();
        }
        let n = pairs.len() as f64;
        WheelDiffStats {
            ticks: pairs.len(),
            mean_lr_norm: pairs.iter().map(|p| p.0).sum::<f64>() / n,
            mean_fr_norm: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub records: usize,
    pub tick_rate_hz: u16,
    pub duration_s: f64,
    pub laps: usize,
    pub mean_speed_kmh: f64,
    pub max_speed_kmh: f64,
    pub steering_corrections: usize,
    /// Last minus first reading, servo/ESC/motor/battery, °C.
    pub temp_delta_c: [f64; 4],
    pub gps_spacing_mean_m: f64,
    /// Main-rail charge drawn, integrated from the current readings.
    pub charge_mah: f64,
    pub straight: WheelDiffStats,
    pub left: WheelDiffStats,
    pub right: WheelDiffStats,
}

pub fn summarize(log: &SessionLog, cfg: &AnalysisConfig) -> RunSummary {
    let recs = log.records();
    let hz = log.tick_rate_hz();
    let n = recs.len();
    let speeds: Vec<f64> = recs.iter().map(mean_speed_kmh).collect();
    let mean_kmh = if n > 0 { speeds.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let max_speed_kmh = speeds.iter().cloned().fold(0.0, f64::max);

    let yaw = smoothed_yaw_rates(recs, cfg.smooth_ticks);
    let mask: Vec<bool> = yaw.iter().map(|r| r.abs() < cfg.straight_yaw_rate).collect();
    let corrections = steering_correction_stats(recs, &mask, cfg.deadband_us)
        .expect("mask built from the same records")
        .count;

    let temp_delta_c = match (recs.first(), recs.last()) {
        (Some(a), Some(b)) => std::array::from_fn(|k| b.temps_c[k] as f64 - a.temps_c[k] as f64),
        _ => [0.0; 4],
    };

    let fixes: Vec<(f64, f64)> = recs
        .iter()
        .filter(|r| r.has_gps_fix())
        .map(|r| cfg.origin.to_xy(r.gps_lat, r.gps_lon))
        .collect();
    let gps_spacing_mean_m = if fixes.len() > 1 {
        fixes.windows(2).map(|w| (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1)).sum::<f64>() / (fixes.len() - 1) as f64
    } else {
        0.0
    };

    let dt = if hz > 0 { 1.0 / hz as f64 } else { 0.0 };
    let charge_mah = recs.iter().map(|r| r.rail_i[0].max(0.0) as f64 * dt / 3.6).sum();

    let (mut straight, mut left, mut right) = (Vec::new(), Vec::new(), Vec::new());
    for (r, &y) in recs.iter().zip(&yaw) {
        if mean_speed_kmh(r) < 1.0 {
            continue;
        }
        let d = wheel_differences(r);
        if y.abs() < cfg.straight_yaw_rate {
            straight.push(d);
        } else if y > 0.0 {
            left.push(d);
        } else {
            right.push(d);
        }
    }

    let laps = lap_segmentation(recs, &cfg.start_line, &cfg.origin, cfg.lap_debounce_s)
        .map(|b| b.len())
        .unwrap_or(0);

    RunSummary {
        scenario: log.header().scenario.clone(),
        records: n,
        tick_rate_hz: hz,
        duration_s: if hz > 0 { n as f64 / hz as f64 } else { 0.0 },
        laps,
        mean_speed_kmh: mean_kmh,
        max_speed_kmh,
        steering_corrections: corrections,
        temp_delta_c,
        gps_spacing_mean_m,
        charge_mah,
        straight: WheelDiffStats::from_pairs(&straight),
        left: WheelDiffStats::from_pairs(&left),
        right: WheelDiffStats::from_pairs(&right),
    }
}

/// `b − a` for every numeric summary field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryDelta {
    pub duration_s: f64,
    pub laps: i64,
    pub mean_speed_kmh: f64,
    pub max_speed_kmh: f64,
    pub steering_corrections: i64,
    pub temp_delta_c: [f64; 4],
    pub gps_spacing_mean_m: f64,
    pub charge_mah: f64,
    pub straight_lr_norm: f64,
    pub left_lr_norm: f64,
    pub right_lr_norm: f64,
}

impl SummaryDelta {
    pub fn between(a: &RunSummary, b: &RunSummary) -> Self {
        SummaryDelta {
            duration_s: b.duration_s - a.duration_s,
            laps: b.laps as i64 - a.laps as i64,
            mean_speed_kmh: b.mean_speed_kmh - a.mean_speed_kmh,
            max_speed_kmh: b.max_speed_kmh - a.max_speed_kmh,
            steering_corrections: b.steering_corrections as i64 - a.steering_corrections as i64,
            temp_delta_c: std::array::from_fn(|k| b.temp_delta_c[k] - a.temp_delta_c[k]),
            gps_spacing_mean_m: b.gps_spacing_mean_m - a.gps_spacing_mean_m,
            charge_mah: b.charge_mah - a.charge_mah,
            straight_lr_norm: b.straight.mean_lr_norm - a.straight.mean_lr_norm,
            left_lr_norm: b.left.mean_lr_norm - a.left.mean_lr_norm,
            right_lr_norm: b.right.mean_lr_norm - a.right.mean_lr_norm,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == SummaryDelta::between(&zero_summary(), &zero_summary())
    }
}

fn zero_summary() -> RunSummary {
    RunSummary {
        scenario: String::new(),
        records: 0,
        tick_rate_hz: 0,
        duration_s: 0.0,
        laps: 0,
        mean_speed_kmh: 0.0,
        max_speed_kmh: 0.0,
        steering_corrections: 0,
        temp_delta_c: [0.0; 4],
        gps_spacing_mean_m: 0.0,
        charge_mah: 0.0,
        straight: WheelDiffStats::default(),
        left: WheelDiffStats::default(),
        right: WheelDiffStats::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: RunSummary,
    pub b: RunSummary,
    pub delta: SummaryDelta,
}

pub fn compare_runs(a: &SessionLog, b: &SessionLog, cfg: &AnalysisConfig) -> Result<Comparison, AnalysisError> {
    if a.tick_rate_hz() != b.tick_rate_hz() {
        return Err(AnalysisError::IncomparableRuns { a: a.tick_rate_hz(), b: b.tick_rate_hz() });
    }
    let sa = summarize(a, cfg);
    let sb = summarize(b, cfg);
    let delta = SummaryDelta::between(&sa, &sb);
    Ok(Comparison { a: sa, b: sb, delta })
}
