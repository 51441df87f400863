//! Kinematic bicycle model with curvature-derived wheel speeds, plus the
//! component thermal model and the two injected faults.

use serde::Serialize;

use crate::power_thermal::BatteryState;
use crate::record::temp;

use super::scenario::{CrashParams, FailureParams};
use super::track::Track;

const GRAVITY: f64 = 9.81;
/// Duration of one half-turn while tumbling, seconds.
pub const HALF_TURN_S: f64 = 0.5;
const CRASH_DECEL_MPS2: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VehicleParams {
    pub wheelbase_m: f64,
    pub track_width_m: f64,
    pub wheel_diameter_m: f64,
    pub max_steer_rad: f64,
    /// Acceleration at full throttle from standstill, m/s².
    pub drive_accel: f64,
    pub drag_per_mps: f64,
    pub rolling_decel: f64,
    /// Front slip per unit throttle above `slip_onset` in normal running.
    pub slip_gain: f64,
    pub slip_onset: f64,
    /// Motor revolutions per wheel revolution.
    pub gear_ratio: f64,
    /// Motor current at full throttle, amps.
    pub full_throttle_a: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            wheelbase_m: 0.35,
            track_width_m: 0.40,
            wheel_diameter_m: 0.12,
            max_steer_rad: 0.5,
            drive_accel: 8.0,
            drag_per_mps: 0.6,
            rolling_decel: 0.5,
            slip_gain: 0.08,
            slip_onset: 0.3,
            gear_ratio: 12.0,
            full_throttle_a: 120.0,
        }
    }
}

/// First-order heating: dT/dt = k_heat·P − (T − T_amb)/τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermalParams {
    /// Effective resistance turning current into heat, per sensor slot.
    pub heat_ohms: [f64; 4],
    pub k_heat: [f64; 4],
    pub tau_s: [f64; 4],
}

impl Default for ThermalParams {
    fn default() -> Self {
        // servo, ESC (fan cooled, short τ), motor, battery pack
        ThermalParams {
            heat_ohms: [2.0, 0.005, 0.02, 0.01],
            k_heat: [0.002, 0.0025, 0.0006, 0.0008],
            tau_s: [200.0, 40.0, 300.0, 600.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub throttle: f64,
    pub steer: f64,
    /// Path curvature imposed by terrain and gusts, 1/m.
    pub disturbance_curvature: f64,
    pub pitch_shake_rad: f64,
    pub roll_shake_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum DriveMode {
    #[default]
    Nominal,
    /// Rear dogbones detached: rear wheels freewheel, the front carries all
    /// drive and slips in proportion to throttle.
    RearUndriven { slip_gain: f64 },
    Tumbling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub t_s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub pitch: f64,
    pub roll: f64,
    /// FL, FR, RL, RR, rad/s.
    pub wheel_omega: [f64; 4],
    pub motor_omega: f64,
    pub throttle: f64,
    pub steer: f64,
    pub accel_long: f64,
    pub accel_lat: f64,
    pub temps_c: [f64; 4],
    pub battery: BatteryState,
    pub mode: DriveMode,
    pub track_idx: usize,
    pub track_frac: f64,
}

impl VehicleState {
    /// Parked on the track `offset_m` past the start line, facing along it.
    pub fn on_track(track: &Track, offset_m: f64, ambient_c: f64) -> Self {
        let (x, y, z) = track.point_at(offset_m);
        let (idx, frac) = track.locate_global(x, y);
        let (tx, ty) = track.tangent(idx);
        VehicleState {
            t_s: 0.0,
            x,
            y,
            z,
            heading: ty.atan2(tx),
            speed: 0.0,
            yaw_rate: 0.0,
            pitch: track.grade(idx).atan(),
            roll: 0.0,
            wheel_omega: [0.0; 4],
            motor_omega: 0.0,
            throttle: 0.0,
            steer: 0.0,
            accel_long: 0.0,
            accel_lat: 0.0,
            temps_c: [ambient_c; 4],
            battery: BatteryState::default(),
            mode: DriveMode::Nominal,
            track_idx: idx,
            track_frac: frac,
        }
    }

    pub fn motor_current_a(&self, p: &VehicleParams) -> f64 {
        p.full_throttle_a * self.throttle.max(0.0)
    }

    pub fn servo_current_a(&self) -> f64 {
        0.3 + 0.8 * self.steer.abs()
    }
}

/// Ground speed of each wheel contact patch (FL, FR, RL, RR) for a vehicle
/// moving at `speed` with yaw rate `yaw_rate`, referenced at the rear axle.
pub fn wheel_ground_speeds(speed: f64, yaw_rate: f64, p: &VehicleParams) -> [f64; 4] {
    let half = yaw_rate * p.track_width_m / 2.0;
    let lat = yaw_rate * p.wheelbase_m;
    let rl = speed - half;
    let rr = speed + half;
    [rl.hypot(lat), rr.hypot(lat), rl.max(0.0), rr.max(0.0)]
        .map(|v| if speed > 0.0 { v } else { 0.0 })
}

/// Front slip ratio for the current drive mode.
pub fn front_slip(throttle: f64, mode: DriveMode, p: &VehicleParams) -> f64 {
    match mode {
        DriveMode::Nominal => p.slip_gain * (throttle - p.slip_onset).max(0.0),
        DriveMode::RearUndriven { slip_gain } => slip_gain * throttle.max(0.0),
        DriveMode::Tumbling => 0.0,
    }
}

/// Advances the vehicle by `dt_s` under `controls`.
pub fn step_vehicle(
    state: &VehicleState,
    track: &Track,
    controls: &Controls,
    p: &VehicleParams,
    dt_s: f64,
) -> VehicleState {
    let mut s = state.clone();
    s.t_s += dt_s;
    s.throttle = controls.throttle.clamp(-1.0, 1.0);
    s.steer = controls.steer.clamp(-1.0, 1.0);

    let grade = track.grade(s.track_idx);
    let resist = p.drag_per_mps * s.speed + if s.speed > 0.01 { p.rolling_decel } else { 0.0 };
    let accel = p.drive_accel * s.throttle - resist - GRAVITY * grade.atan().sin();
    let v = (s.speed + accel * dt_s).max(0.0);
    s.accel_long = (v - s.speed) / dt_s;
    s.speed = v;

    let delta = s.steer * p.max_steer_rad;
    let curvature = delta.tan() / p.wheelbase_m + controls.disturbance_curvature;
    s.yaw_rate = v * curvature;
    s.accel_lat = v * s.yaw_rate;
    let mid_heading = s.heading + 0.5 * s.yaw_rate * dt_s;
    s.x += v * mid_heading.cos() * dt_s;
    s.y += v * mid_heading.sin() * dt_s;
    s.heading += s.yaw_rate * dt_s;

    let (idx, frac) = track.locate(s.x, s.y, s.track_idx);
    s.track_idx = idx;
    s.track_frac = frac;
    s.z = track.elevation(idx, frac);
    s.pitch = track.grade(idx).atan() + controls.pitch_shake_rad;
    s.roll = -0.01 * s.accel_lat + controls.roll_shake_rad;

    update_wheels(&mut s, p);
    s
}

fn update_wheels(s: &mut VehicleState, p: &VehicleParams) {
    let radius = p.wheel_diameter_m / 2.0;
    let ground = wheel_ground_speeds(s.speed, s.yaw_rate, p);
    let slip = front_slip(s.throttle, s.mode, p);
    s.wheel_omega = [
        ground[0] * (1.0 + slip) / radius,
        ground[1] * (1.0 + slip) / radius,
        ground[2] / radius,
        ground[3] / radius,
    ];
    // centre differential: motor follows the mean of the driven wheels
    let driven = match s.mode {
        DriveMode::RearUndriven { .. } => (s.wheel_omega[0] + s.wheel_omega[1]) / 2.0,
        _ => s.wheel_omega.iter().sum::<f64>() / 4.0,
    };
    s.motor_omega = driven * p.gear_ratio;
}

/// Switches to the undriven-rear mode once `t_s` reaches the onset.
pub fn apply_failure(state: &VehicleState, failure: &FailureParams, t_s: f64) -> VehicleState {
    let mut s = state.clone();
    if t_s >= failure.onset_s && s.mode == DriveMode::Nominal {
        s.mode = DriveMode::RearUndriven { slip_gain: failure.slip_gain };
    }
    s
}

/// Time from the crash start until the vehicle comes to rest on its roof.
pub fn tumble_duration_s(tumbles: u32) -> f64 {
    let half_turns = tumbles + 1 + tumbles % 2;
    half_turns as f64 * HALF_TURN_S
}

/// Body pitch and roll (radians, pitch unwrapped) `elapsed` seconds into a
/// tumble. The body pitches through `tumbles + 1` half-turns, so its reported
/// pitch changes sign `tumbles` times; an odd count then rolls onto the roof.
pub fn tumble_attitude(tumbles: u32, elapsed: f64) -> (f64, f64) {
    let pitch_total = (tumbles + 1) as f64 * 180.0;
    let pitch_time = (tumbles + 1) as f64 * HALF_TURN_S;
    let pitch = (elapsed / pitch_time).clamp(0.0, 1.0) * pitch_total;
    let roll = if tumbles % 2 == 1 {
        ((elapsed - pitch_time) / HALF_TURN_S).clamp(0.0, 1.0) * 180.0
    } else {
        0.0
    };
    (pitch.to_radians(), roll.to_radians())
}

/// Overrides motion while the vehicle tumbles. Before the crash time the
/// state is returned unchanged.
pub fn apply_crash(state: &VehicleState, crash: &CrashParams, p: &VehicleParams, dt_s: f64) -> VehicleState {
    if state.t_s < crash.time_s {
        return state.clone();
    }
    let mut s = state.clone();
    s.mode = DriveMode::Tumbling;
    s.throttle = 0.0;
    s.steer = 0.0;
    let v = (s.speed - CRASH_DECEL_MPS2 * dt_s).max(0.0);
    s.accel_long = (v - s.speed) / dt_s;
    s.speed = v;
    s.yaw_rate = 0.0;
    s.accel_lat = 0.0;
    s.x += v * s.heading.cos() * dt_s;
    s.y += v * s.heading.sin() * dt_s;
    let (pitch, roll) = tumble_attitude(crash.tumbles, s.t_s - crash.time_s);
    s.pitch = pitch;
    s.roll = roll;
    update_wheels(&mut s, p);
    s
}

/// Heat dissipated in each sensor slot for the present draw, watts.
pub fn component_power_w(state: &VehicleState, p: &VehicleParams, tp: &ThermalParams) -> [f64; 4] {
    let motor_i = state.motor_current_a(p);
    let servo_i = state.servo_current_a();
    let mut out = [0.0; 4];
    for (k, w) in out.iter_mut().enumerate() {
        let i = if k == temp::SERVO { servo_i } else { motor_i };
        *w = i * i * tp.heat_ohms[k];
    }
    out
}

pub fn step_thermal(temps: &[f64; 4], power_w: &[f64; 4], ambient_c: f64, tp: &ThermalParams, dt_s: f64) -> [f64; 4] {
    let mut out = *temps;
    for k in 0..4 {
        let dtemp = tp.k_heat[k] * power_w[k] - (temps[k] - ambient_c) / tp.tau_s[k];
        out[k] += dtemp * dt_s;
    }
    out
}
