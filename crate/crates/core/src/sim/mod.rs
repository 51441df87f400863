//! Scenario simulator: drives a vehicle model round a track and records what
//! the onboard DAQ would have logged, alongside the ground truth.

pub mod driver;
pub mod scenario;
pub mod sensors;
pub mod track;
pub mod vehicle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{CrashDetector, DiffFailureDetector};
use crate::power_thermal::step_battery;
use crate::record::StatusFlags;
use crate::session_log::{LogError, SessionLog};

pub use driver::Driver;
pub use scenario::{CrashParams, DriverParams, FailureParams, GpsParams, NoiseParams, Scenario, ScenarioKind};
pub use sensors::SensorSuite;
pub use track::{Track, Waypoint};
pub use vehicle::{
    apply_crash, apply_failure, step_vehicle, tumble_duration_s, wheel_ground_speeds, Controls, DriveMode,
    ThermalParams, VehicleParams, VehicleState,
};

const SUBSTEP_S: f64 = 0.01;
const START_OFFSET_M: f64 = 3.0;
const LAP_TAIL_S: f64 = 3.0;
const CRASH_TAIL_S: f64 = 10.0;
const MAX_RUN_S: f64 = 3600.0;
/// Yaw rate above which a tick counts as turning, rad/s.
pub const TURNING_YAW_RATE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error("invalid track: {0}")]
    BadTrack(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// True state for one logged tick.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthTick {
    pub seq: u32,
    pub t_ms: u64,
    pub x: f64,
    pub y: f64,
    pub speed_mps: f64,
    /// Contact-patch ground speed plus slip, FL FR RL RR, m/s.
    pub wheel_speed_mps: [f64; 4],
    /// Mean yaw rate over the tick, rad/s (positive counter-clockwise).
    pub yaw_rate: f64,
    /// +1 clockwise, -1 counter-clockwise, 0 below the turning threshold.
    pub turn: i8,
    pub throttle: f64,
    pub failure_active: bool,
    pub crash_active: bool,
    pub lap: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrashTruth {
    pub start_ms: u64,
    pub end_ms: u64,
    pub tumbles: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub tick_rate_hz: u16,
    pub track_length_m: f64,
    pub lap_boundaries_ms: Vec<u64>,
    pub failure_onset_ms: Option<u64>,
    pub crashes: Vec<CrashTruth>,
    pub battery_used_mah: f64,
    pub ticks: Vec<TruthTick>,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub log: SessionLog,
    pub truth: GroundTruth,
}

/// Loads the scenario's track file, or the built-in loop when none is set.
pub fn load_track(sc: &Scenario) -> Result<Track, SimError> {
    match &sc.track_file {
        Some(path) => Track::load(path),
        None => Ok(Track::builtin()),
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn run_scenario(sc: &Scenario, track: &Track) -> Result<SimRun, SimError> {
    sc.validate()?;
    let vp = VehicleParams::default();
    let tp = ThermalParams::default();
    let tick_s = 1.0 / sc.tick_rate_hz as f64;
    let substeps = (tick_s / SUBSTEP_S).round().max(1.0) as usize;
    let dt = tick_s / substeps as f64;

    let mut drive_rng = rng_stream(sc.seed, 1);
    let mut pulse_rng = rng_stream(sc.seed, 2);
    let mut sensor_rng = rng_stream(sc.seed, 3);

    let mut driver = Driver::new(track, sc.driver, sc.noise.terrain_deg);
    let mut sensors = SensorSuite::new(sc, &vp)?;
    let mut state = VehicleState::on_track(track, START_OFFSET_M, sc.noise.ambient_c);
    let gate = track.start_line();

    let mut log = SessionLog::new(sc.kind.as_str(), sc.tick_rate_hz);
    let mut ticks = Vec::new();
    let mut laps: Vec<u64> = Vec::new();
    let mut crash_truth: Option<CrashTruth> = None;
    let mut diff_detector = DiffFailureDetector::new(Default::default());
    let mut crash_detector = CrashDetector::new(Default::default());
    let mut battery_used = 0.0;

    let fixed_ticks = sc.duration_s.map(|d| (d * sc.tick_rate_hz as f64).round() as u64);
    let max_ticks = (MAX_RUN_S * sc.tick_rate_hz as f64) as u64;
    let mut end_tick: Option<u64> = fixed_ticks;

    let mut seq: u32 = 0;
    loop {
        if let Some(end) = end_tick {
            if seq as u64 >= end {
                break;
            }
        } else if seq as u64 >= max_ticks {
            break;
        }

        let heading0 = state.heading;
        let tick_t0 = seq as f64 * tick_s;
        for k in 0..substeps {
            let t0 = tick_t0 + k as f64 * dt;
            let prev = (state.x, state.y);
            state = match (&sc.crash, state.mode) {
                (Some(c), _) if t0 + dt >= c.time_s => {
                    let mut next = state.clone();
                    next.t_s = t0 + dt;
                    apply_crash(&next, c, &vp, dt)
                }
                _ => {
                    let controls = driver.command(&state, track, &vp, dt, &mut drive_rng);
                    let mut next = step_vehicle(&state, track, &controls, &vp, dt);
                    if let Some(f) = &sc.failure {
                        next = apply_failure(&next, f, next.t_s);
                    }
                    next
                }
            };
            let power = vehicle::component_power_w(&state, &vp, &tp);
            state.temps_c = vehicle::step_thermal(&state.temps_c, &power, sc.noise.ambient_c, &tp, dt);
            let draw = state.motor_current_a(&vp) + state.servo_current_a() + 1.2;
            state.battery = step_battery(&state.battery, draw, dt)
                .map_err(|e| SimError::BadConfig(e.to_string()))?
                .state;
            battery_used += draw * dt / 3.6;

            if state.mode != DriveMode::Tumbling && gate.crossing(prev, (state.x, state.y)).is_some() {
                laps.push(((t0 + dt) * 1000.0).round() as u64);
                if sc.duration_s.is_none() && sc.crash.is_none() && laps.len() as u32 == sc.laps {
                    end_tick = Some(seq as u64 + 1 + (LAP_TAIL_S * sc.tick_rate_hz as f64).round() as u64);
                }
            }
            sensors.substep(&state, t0, dt, &mut pulse_rng);
        }

        let timestamp_ms = (seq as u64 + 1) * 1000 / sc.tick_rate_hz as u64;
        let (mut rec, _) = sensors.sample(&state, sc, &vp, seq, timestamp_ms, &mut sensor_rng)?;

        // onboard detectors run on the record stream itself
        let mut flags = rec.flags();
        diff_detector.push(&rec);
        crash_detector.push(&rec);
        flags.set(StatusFlags::DIFF_FAILURE_SUSPECTED, diff_detector.is_active());
        flags.set(StatusFlags::CRASH_DETECTED, crash_detector.in_episode());
        rec.status_flags = flags.bits();
        log.append(rec)?;

        let t_end = (seq + 1) as f64 * tick_s;
        let crash_active = match &sc.crash {
            Some(c) => {
                let end = c.time_s + tumble_duration_s(c.tumbles);
                if t_end >= c.time_s && crash_truth.is_none() {
                    crash_truth = Some(CrashTruth {
                        start_ms: (c.time_s * 1000.0).round() as u64,
                        end_ms: (end * 1000.0).round() as u64,
                        tumbles: c.tumbles,
                    });
                    if sc.duration_s.is_none() {
                        end_tick = Some(((end + CRASH_TAIL_S) * sc.tick_rate_hz as f64).ceil() as u64);
                    }
                }
                t_end >= c.time_s && t_end - tick_s <= end
            }
            None => false,
        };
        let yaw_rate = (state.heading - heading0) / tick_s;
        let turn = if yaw_rate < -TURNING_YAW_RATE {
            1
        } else if yaw_rate > TURNING_YAW_RATE {
            -1
        } else {
            0
        };
        let radius = vp.wheel_diameter_m / 2.0;
        ticks.push(TruthTick {
            seq,
            t_ms: timestamp_ms,
            x: state.x,
            y: state.y,
            speed_mps: state.speed,
            wheel_speed_mps: state.wheel_omega.map(|w| w * radius),
            yaw_rate,
            turn,
            throttle: state.throttle,
            failure_active: matches!(state.mode, DriveMode::RearUndriven { .. }),
            crash_active,
            lap: laps.len() as u32,
        });
        seq += 1;
    }

    Ok(SimRun {
        log,
        truth: GroundTruth {
            scenario: sc.kind,
            seed: sc.seed,
            tick_rate_hz: sc.tick_rate_hz,
            track_length_m: track.length_m(),
            lap_boundaries_ms: laps,
            failure_onset_ms: sc.failure.map(|f| (f.onset_s * 1000.0).round() as u64),
            crashes: crash_truth.into_iter().collect(),
            battery_used_mah: battery_used,
            ticks,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::wheel;

    fn short(kind: ScenarioKind, secs: f64) -> Scenario {
        Scenario::preset(kind).with_duration(Some(secs))
    }

    #[test]
    fn deterministic() {
        let track = Track::builtin();
        let sc = short(ScenarioKind::FastLap, 20.0);
        let a = run_scenario(&sc, &track).unwrap();
        let b = run_scenario(&sc, &track).unwrap();
        assert_eq!(a.log.to_bytes().unwrap(), b.log.to_bytes().unwrap());
        assert_eq!(a.truth, b.truth);
        let c = run_scenario(&sc.clone().with_seed(43), &track).unwrap();
        assert_ne!(a.log.to_bytes().unwrap(), c.log.to_bytes().unwrap());
    }

    #[test]
    fn logs_and_truth_align() {
        let track = Track::builtin();
        let run = run_scenario(&short(ScenarioKind::SlowLap, 12.3), &track).unwrap();
        assert_eq!(run.log.len(), 123);
        assert_eq!(run.truth.ticks.len(), 123);
        assert_eq!(run.log.records()[122].timestamp_ms, 12_300);
        for (r, t) in run.log.records().iter().zip(&run.truth.ticks) {
            assert_eq!(r.seq, t.seq);
            assert_eq!(r.timestamp_ms, t.t_ms);
            r.validate().unwrap();
        }
    }

    #[test]
    fn lap_count_ends_run() {
        let track = Track::builtin();
        let mut sc = Scenario::preset(ScenarioKind::FastLap).with_duration(None);
        sc.laps = 2;
        let run = run_scenario(&sc, &track).unwrap();
        assert_eq!(run.truth.lap_boundaries_ms.len(), 2);
        let last = *run.truth.lap_boundaries_ms.last().unwrap();
        let end = run.log.records().last().unwrap().timestamp_ms;
        assert!(end >= last + 2_900 && end <= last + 3_200, "{last} {end}");
    }

    #[test]
    fn straight_line_equality() {
        let track = Track::builtin();
        let run = run_scenario(&short(ScenarioKind::SlowLap, 120.0), &track).unwrap();
        let mut checked = 0;
        for t in &run.truth.ticks {
            if t.yaw_rate.abs() < 0.02 && t.throttle < 0.3 && t.speed_mps > 0.5 {
                let w = t.wheel_speed_mps;
                let mean = w.iter().sum::<f64>() / 4.0;
                let spread = w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
                assert!(spread < 0.02 * mean, "tick {} spread {spread} mean {mean}", t.seq);
                checked += 1;
            }
        }
        assert!(checked > 100, "{checked}");
    }

    #[test]
    fn stationary_vehicle() {
        let track = Track::builtin();
        let mut sc = short(ScenarioKind::SlowLap, 30.0);
        sc.driver.target_speed_mps = 1e-9;
        let run = run_scenario(&sc, &track).unwrap();
        let first = run.log.records()[0];
        for r in run.log.records() {
            assert!(r.wheel_speed_rpm.iter().all(|&w| w.abs() < 1e-3), "{:?}", r.wheel_speed_rpm);
            assert!((r.temps_c[2] - first.temps_c[2]).abs() < 0.2);
            assert!(r.has_gps_fix());
        }
    }

    #[test]
    fn fast_covers_more_ground_and_energy() {
        let track = Track::builtin();
        let slow = run_scenario(&short(ScenarioKind::SlowLap, 60.0), &track).unwrap();
        let fast = run_scenario(&short(ScenarioKind::FastLap, 60.0), &track).unwrap();
        assert!(fast.truth.battery_used_mah > slow.truth.battery_used_mah);
        let dist = |r: &SimRun| r.truth.ticks.iter().map(|t| t.speed_mps).sum::<f64>();
        assert!(dist(&fast) > 1.5 * dist(&slow));
    }

    #[test]
    fn crash_keeps_logging() {
        let track = Track::builtin();
        let run = run_scenario(&Scenario::preset(ScenarioKind::Crash), &track).unwrap();
        let c = &run.truth.crashes[0];
        assert_eq!(c.tumbles, 2);
        let last = run.log.records().last().unwrap();
        assert!(last.timestamp_ms >= c.end_ms + 10_000);
        for w in run.log.records().windows(2) {
            assert_eq!(w[1].seq, w[0].seq + 1);
        }
        assert!(last.wheel_speed_rpm[wheel::FL].abs() < 1e-3);
        assert!((last.euler_deg[2].abs() - 180.0).abs() < 1.0);
    }
}
