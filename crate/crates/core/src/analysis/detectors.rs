//! Streaming detectors. Each owns its window state and sees one record at a
//! time, so the simulator can run them onboard and analysis can replay them.

use serde::{Deserialize, Serialize};

use crate::power_thermal::{ThermalMonitor, ThermalStatus, CRITICAL_SHIFT_C, DEFAULT_THERMAL_WINDOW_S};
use crate::record::{rail, TelemetryRecord};

use super::{mean_speed_kmh, wheel_differences, yaw_rate_between, DetectionEvent, EventDetail, EventKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffFailureConfig {
    /// Normalised front-minus-rear difference that counts as abnormal.
    pub threshold: f64,
    pub sustain_s: f64,
    /// Fraction of the threshold below which an active episode may clear.
    pub clear_ratio: f64,
    pub clear_s: f64,
    pub min_throttle_us: u16,
    pub max_yaw_rate: f64,
    pub min_speed_kmh: f64,
}

impl Default for DiffFailureConfig {
    fn default() -> Self {
        DiffFailureConfig {
            threshold: 0.25,
            sustain_s: 2.0,
            clear_ratio: 0.5,
            clear_s: 10.0,
            min_throttle_us: 1600,
            max_yaw_rate: 0.6,
            min_speed_kmh: 2.0,
        }
    }
}

/// Fires once per sustained episode of abnormal front-over-rear wheel speed
/// on throttled, near-straight ticks. Other ticks are skipped without
/// resetting the episode.
#[derive(Debug, Clone)]
pub struct DiffFailureDetector {
    cfg: DiffFailureConfig,
    prev: Option<TelemetryRecord>,
    pending_since: Option<u64>,
    active: bool,
    calm_since: Option<u64>,
}

impl DiffFailureDetector {
    pub fn new(cfg: DiffFailureConfig) -> Self {
        DiffFailureDetector { cfg, prev: None, pending_since: None, active: false, calm_since: None }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn push(&mut self, rec: &TelemetryRecord) -> Option<DetectionEvent> {
        let prev = self.prev.replace(*rec)?;
        let c = &self.cfg;
        let qualifies = rec.throttle_pwm_us >= c.min_throttle_us
            && yaw_rate_between(&prev, rec).abs() < c.max_yaw_rate
            && mean_speed_kmh(rec) > c.min_speed_kmh;
        if !qualifies {
            return None;
        }
        let (_, diff) = wheel_differences(rec);
        let t = rec.timestamp_ms;

        if self.active {
            if diff < c.threshold * c.clear_ratio {
                let since = *self.calm_since.get_or_insert(t);
                if (t - since) as f64 >= c.clear_s * 1000.0 {
                    self.active = false;
                    self.calm_since = None;
                    self.pending_since = None;
                }
            } else {
                self.calm_since = None;
            }
            return None;
        }

        if diff > c.threshold {
            let since = *self.pending_since.get_or_insert(t);
            if (t - since) as f64 >= c.sustain_s * 1000.0 {
                self.active = true;
                self.pending_since = None;
                return Some(DetectionEvent {
                    kind: EventKind::DiffFailure,
                    t_ms: t,
                    detail: EventDetail::WheelDifference { normalized: diff },
                });
            }
        } else {
            self.pending_since = None;
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashConfig {
    pub pitch_threshold_deg: f64,
    /// Largest gap between opposite-sign excursions that still counts as one
    /// tumble sequence.
    pub window_s: f64,
    pub settle_s: f64,
}

impl Default for CrashConfig {
    fn default() -> Self {
        CrashConfig { pitch_threshold_deg: 60.0, window_s: 3.0, settle_s: 1.0 }
    }
}

/// Counts pitch sign flips between large-pitch excursions. An episode closes
/// once pitch has stayed under the threshold for `settle_s`; it reports a
/// crash if it saw at least one flip.
#[derive(Debug, Clone)]
pub struct CrashDetector {
    cfg: CrashConfig,
    in_episode: bool,
    start_ms: u64,
    last_sign: f64,
    last_excursion_ms: u64,
    flips: u32,
    calm_since: Option<u64>,
}

impl CrashDetector {
    pub fn new(cfg: CrashConfig) -> Self {
        CrashDetector {
            cfg,
            in_episode: false,
            start_ms: 0,
            last_sign: 0.0,
            last_excursion_ms: 0,
            flips: 0,
            calm_since: None,
        }
    }

    pub fn in_episode(&self) -> bool {
        self.in_episode
    }

    pub fn push(&mut self, rec: &TelemetryRecord) -> Option<DetectionEvent> {
        let pitch = rec.euler_deg[1] as f64;
        let t = rec.timestamp_ms;
        if pitch.abs() >= self.cfg.pitch_threshold_deg {
            let sign = pitch.signum();
            if !self.in_episode {
                self.in_episode = true;
                self.start_ms = t;
                self.flips = 0;
            } else if sign != self.last_sign && (t - self.last_excursion_ms) as f64 <= self.cfg.window_s * 1000.0 {
                self.flips += 1;
            }
            self.last_sign = sign;
            self.last_excursion_ms = t;
            self.calm_since = None;
            return None;
        }
        if !self.in_episode {
            return None;
        }
        let since = *self.calm_since.get_or_insert(t);
        if (t - since) as f64 >= self.cfg.settle_s * 1000.0 {
            return self.close();
        }
        None
    }

    /// Closes any open episode at the end of the stream.
    pub fn finish(&mut self) -> Option<DetectionEvent> {
        if self.in_episode {
            self.close()
        } else {
            None
        }
    }

    fn close(&mut self) -> Option<DetectionEvent> {
        self.in_episode = false;
        self.calm_since = None;
        (self.flips >= 1).then_some(DetectionEvent {
            kind: EventKind::Crash,
            t_ms: self.start_ms,
            detail: EventDetail::Tumbles { count: self.flips },
        })
    }
}

/// Flags each temperature sensor once when its spread over the window
/// reaches the critical shift, re-arming after it falls back to nominal.
#[derive(Debug, Clone)]
pub struct ThermalDetector {
    monitors: Vec<ThermalMonitor>,
    alarmed: [bool; 4],
}

impl Default for ThermalDetector {
    fn default() -> Self {
        ThermalDetector {
            monitors: (0..4).map(|_| ThermalMonitor::new(DEFAULT_THERMAL_WINDOW_S)).collect(),
            alarmed: [false; 4],
        }
    }
}

impl ThermalDetector {
    pub fn push(&mut self, rec: &TelemetryRecord) -> Vec<DetectionEvent> {
        let t_s = rec.timestamp_ms as f64 / 1000.0;
        let mut out = Vec::new();
        for (k, m) in self.monitors.iter_mut().enumerate() {
            let status = m.push(t_s, rec.temps_c[k] as f64);
            match (status, self.alarmed[k]) {
                (ThermalStatus::Critical, false) => {
                    self.alarmed[k] = true;
                    out.push(DetectionEvent {
                        kind: EventKind::ThermalCritical,
                        t_ms: rec.timestamp_ms,
                        detail: EventDetail::TemperatureShift { sensor: k, spread_c: m.spread().max(CRITICAL_SHIFT_C) },
                    });
                }
                (ThermalStatus::Nominal, true) => self.alarmed[k] = false,
                _ => {}
            }
        }
        out
    }
}

const BATTERY_LOW_V: f64 = 13.2;
const BATTERY_REARM_V: f64 = 13.5;

pub fn detect_diff_failure(records: &[TelemetryRecord], cfg: &DiffFailureConfig) -> Vec<DetectionEvent> {
    let mut d = DiffFailureDetector::new(*cfg);
    records.iter().filter_map(|r| d.push(r)).collect()
}

pub fn detect_crash(records: &[TelemetryRecord], cfg: &CrashConfig) -> Vec<DetectionEvent> {
    let mut d = CrashDetector::new(*cfg);
    let mut out: Vec<DetectionEvent> = records.iter().filter_map(|r| d.push(r)).collect();
    out.extend(d.finish());
    out
}

pub fn detect_thermal(records: &[TelemetryRecord]) -> Vec<DetectionEvent> {
    let mut d = ThermalDetector::default();
    records.iter().flat_map(|r| d.push(r)).collect()
}

pub fn detect_battery_low(records: &[TelemetryRecord]) -> Vec<DetectionEvent> {
    let mut low = false;
    let mut out = Vec::new();
    for r in records {
        let v = r.rail_v[rail::MAIN] as f64;
        if !low && v < BATTERY_LOW_V {
            low = true;
            out.push(DetectionEvent {
                kind: EventKind::BatteryLow,
                t_ms: r.timestamp_ms,
                detail: EventDetail::Voltage { volts: v },
            });
        } else if low && v > BATTERY_REARM_V {
            low = false;
        }
    }
    out
}

/// Every detector over one log, ordered by time.
pub fn detect_all(
    records: &[TelemetryRecord],
    diff: &DiffFailureConfig,
    crash: &CrashConfig,
) -> Vec<DetectionEvent> {
    let mut events = detect_diff_failure(records, diff);
    events.extend(detect_crash(records, crash));
    events.extend(detect_thermal(records));
    events.extend(detect_battery_low(records));
    events.sort_by_key(|e| e.t_ms);
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tests::rec;

    fn driving(seq: u32, front: f32, rear: f32, throttle: u16) -> TelemetryRecord {
        let mut r = rec(seq);
        r.wheel_speed_rpm = [front, front, rear, rear];
        r.throttle_pwm_us = throttle;
        r
    }

    #[test]
    fn parked_never_fires() {
        let recs: Vec<_> = (0..600).map(|k| driving(k, 0.0, 0.0, 1500)).collect();
        assert!(detect_diff_failure(&recs, &DiffFailureConfig::default()).is_empty());
    }

    #[test]
    fn sustained_difference_fires_once() {
        let recs: Vec<_> = (0..600)
            .map(|k| if k < 100 { driving(k, 500.0, 500.0, 1700) } else { driving(k, 800.0, 500.0, 1700) })
            .collect();
        let ev = detect_diff_failure(&recs, &DiffFailureConfig::default());
        assert_eq!(ev.len(), 1);
        // first abnormal tick at seq 100 (t = 10.1 s), fires 2 s later
        assert_eq!(ev[0].t_ms, 12_100);
    }

    #[test]
    fn short_burst_does_not_fire() {
        let recs: Vec<_> = (0..300)
            .map(|k| if (50..65).contains(&k) { driving(k, 800.0, 500.0, 1700) } else { driving(k, 500.0, 500.0, 1700) })
            .collect();
        assert!(detect_diff_failure(&recs, &DiffFailureConfig::default()).is_empty());
    }

    #[test]
    fn coasting_ticks_are_skipped_not_reset() {
        // abnormal under throttle, coasting every third tick
        let recs: Vec<_> = (0..100)
            .map(|k| if k % 3 == 0 { driving(k, 500.0, 500.0, 1500) } else { driving(k, 800.0, 500.0, 1700) })
            .collect();
        assert_eq!(detect_diff_failure(&recs, &DiffFailureConfig::default()).len(), 1);
    }

    #[test]
    fn clears_and_refires_after_recovery() {
        let recs: Vec<_> = (0..800)
            .map(|k| match k {
                0..=99 => driving(k, 800.0, 500.0, 1700),
                100..=299 => driving(k, 500.0, 500.0, 1700),
                _ => driving(k, 800.0, 500.0, 1700),
            })
            .collect();
        assert_eq!(detect_diff_failure(&recs, &DiffFailureConfig::default()).len(), 2);
    }

    fn pitched(seq: u32, pitch: f32) -> TelemetryRecord {
        let mut r = rec(seq);
        r.euler_deg[1] = pitch;
        r
    }

    #[test]
    fn counts_flips() {
        let pitches = [0.0, 10.0, 80.0, 30.0, -5.0, -75.0, -20.0, 70.0, 10.0, 0.0, 0.0];
        let mut recs: Vec<_> = pitches.iter().enumerate().map(|(k, &p)| pitched(k as u32, p)).collect();
        recs.extend((11..40).map(|k| pitched(k, 0.0)));
        let ev = detect_crash(&recs, &CrashConfig::default());
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].detail, EventDetail::Tumbles { count: 2 });
        assert_eq!(ev[0].t_ms, 300);
    }

    #[test]
    fn small_oscillation_ignored() {
        let recs: Vec<_> = (0..500).map(|k| pitched(k, if k % 2 == 0 { 5.0 } else { -5.0 })).collect();
        assert!(detect_crash(&recs, &CrashConfig::default()).is_empty());
    }

    #[test]
    fn single_excursion_is_not_a_crash() {
        let recs: Vec<_> = (0..50).map(|k| pitched(k, if k == 10 { 70.0 } else { 0.0 })).collect();
        assert!(detect_crash(&recs, &CrashConfig::default()).is_empty());
    }

    #[test]
    fn thermal_shift() {
        let recs: Vec<_> = (0..700)
            .map(|k| {
                let mut r = rec(k);
                r.temps_c[2] = 20.0 + k as f32 * 0.02;
                r
            })
            .collect();
        let ev = detect_thermal(&recs);
        assert_eq!(ev.len(), 1);
        assert!(matches!(ev[0].detail, EventDetail::TemperatureShift { sensor: 2, .. }));
        assert!(ev[0].is_critical());
    }

    #[test]
    fn battery_low_is_not_critical() {
        let recs: Vec<_> = (0..10)
            .map(|k| {
                let mut r = rec(k);
                r.rail_v[0] = 14.0 - k as f32 * 0.2;
                r
            })
            .collect();
        let ev = detect_battery_low(&recs);
        assert_eq!(ev.len(), 1);
        assert!(!ev[0].is_critical());
    }
}
