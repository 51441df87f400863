//! Pure-pursuit driver with a curvature-limited speed plan.
//!
//! The driver also counter-steers against a random path-curvature
//! disturbance whose strength grows with longitudinal acceleration. Holding a
//! straight line under hard acceleration therefore takes larger and more
//! frequent steering corrections.

use rand::Rng;
use rand_distr::StandardNormal;

use super::scenario::DriverParams;
use super::track::Track;
use super::vehicle::{Controls, VehicleParams, VehicleState};

const THROTTLE_GAIN: f64 = 0.6;
const LOOKAHEAD_BASE_M: f64 = 1.0;
const LOOKAHEAD_PER_MPS: f64 = 0.3;
const DISTURBANCE_TAU_S: f64 = 1.5;
const DISTURBANCE_BASE: f64 = 0.02;
const DISTURBANCE_PER_ACCEL: f64 = 0.05;
const REACTION_TAU_S: f64 = 0.03;
const HAND_SIGMA_RAD: f64 = 0.004;
const HAND_TAU_S: f64 = 0.2;
const SHAKE_TAU_S: f64 = 0.08;
const ACCEL_SMOOTH_S: f64 = 0.5;

/// Ornstein-Uhlenbeck process with unit stationary variance.
#[derive(Debug, Clone, Copy, Default)]
struct Ou(f64);

impl Ou {
    fn step<R: Rng + ?Sized>(&mut self, tau_s: f64, dt_s: f64, rng: &mut R) -> f64 {
        let phi = (-dt_s / tau_s).exp();
        let n: f64 = rng.sample(StandardNormal);
        self.0 = phi * self.0 + (1.0 - phi * phi).sqrt() * n;
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Driver {
    params: DriverParams,
    speed_plan: Vec<f64>,
    disturbance: Ou,
    counter_steer: f64,
    hand: Ou,
    pitch_shake: Ou,
    roll_shake: Ou,
    accel_smooth: f64,
    shake_deg: f64,
}

/// Speed the driver aims for at each waypoint: the cornering limit, pulled
/// down ahead of bends so braking can reach it.
pub fn speed_plan(track: &Track, params: &DriverParams) -> Vec<f64> {
    let n = track.len();
    let mut plan: Vec<f64> = (0..n)
        .map(|i| {
            let k = track.curvature(i).abs();
            if k > 1e-6 {
                params.target_speed_mps.min((params.lateral_accel_mps2 / k).sqrt())
            } else {
                params.target_speed_mps
            }
        })
        .collect();
    // backward pass, twice round the loop so the wrap is settled
    for _ in 0..2 {
        for i in (0..n).rev() {
            let next = plan[(i + 1) % n];
            let ds = track.arc_length(i + 1) - track.arc_length(i);
            let ds = if ds > 0.0 { ds } else { track.length_m() - track.arc_length(i) };
            let reachable = (next * next + 2.0 * params.brake_decel_mps2 * ds).sqrt();
            plan[i] = plan[i].min(reachable);
        }
    }
    plan
}

impl Driver {
    pub fn new(track: &Track, params: DriverParams, shake_deg: f64) -> Self {
        Driver {
            speed_plan: speed_plan(track, &params),
            params,
            disturbance: Ou::default(),
            counter_steer: 0.0,
            hand: Ou::default(),
            pitch_shake: Ou::default(),
            roll_shake: Ou::default(),
            accel_smooth: 0.0,
            shake_deg,
        }
    }

    pub fn target_speed(&self, idx: usize) -> f64 {
        self.speed_plan[idx % self.speed_plan.len()]
    }

    pub fn command<R: Rng + ?Sized>(
        &mut self,
        state: &VehicleState,
        track: &Track,
        vp: &VehicleParams,
        dt_s: f64,
        rng: &mut R,
    ) -> Controls {
        let idx = state.track_idx;
        let v = state.speed;

        let v_ref = self.target_speed(idx + 2);
        let grade = track.grade(idx);
        let hold = if v_ref > 0.05 {
            (vp.drag_per_mps * v + vp.rolling_decel + 9.81 * grade.atan().sin()) / vp.drive_accel
        } else {
            0.0
        };
        let throttle = (hold + THROTTLE_GAIN * (v_ref - v)).clamp(-1.0, 1.0);

        let s_here = track.arc_length(idx)
            + state.track_frac * (track.arc_length(idx + 1) - track.arc_length(idx)).rem_euclid(track.length_m());
        let lookahead = LOOKAHEAD_BASE_M + LOOKAHEAD_PER_MPS * v;
        let (tx, ty, _) = track.point_at(s_here + lookahead);
        let alpha = wrap_pi((ty - state.y).atan2(tx - state.x) - state.heading);
        let pursuit = (2.0 * vp.wheelbase_m * alpha.sin() / lookahead).atan();

        let a = 1.0 - (-dt_s / ACCEL_SMOOTH_S).exp();
        self.accel_smooth += a * (state.accel_long.abs() - self.accel_smooth);
        let sigma = self.params.steering_noise * (DISTURBANCE_BASE + DISTURBANCE_PER_ACCEL * self.accel_smooth);
        let disturbance = sigma * self.disturbance.step(DISTURBANCE_TAU_S, dt_s, rng);
        let r = 1.0 - (-dt_s / REACTION_TAU_S).exp();
        self.counter_steer += r * (disturbance - self.counter_steer);
        let counter = -(vp.wheelbase_m * self.counter_steer).atan();
        let hand = self.params.steering_noise * HAND_SIGMA_RAD * self.hand.step(HAND_TAU_S, dt_s, rng);

        let delta = (pursuit + counter + hand).clamp(-vp.max_steer_rad, vp.max_steer_rad);
        let shake = (self.shake_deg * track.roughness(idx)).to_radians();
        Controls {
            throttle,
            steer: delta / vp.max_steer_rad,
            disturbance_curvature: disturbance,
            pitch_shake_rad: shake * self.pitch_shake.step(SHAKE_TAU_S, dt_s, rng),
            roll_shake_rad: shake * self.roll_shake.step(SHAKE_TAU_S, dt_s, rng),
        }
    }
}

pub fn wrap_pi(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{Scenario, ScenarioKind};
    use crate::sim::vehicle::step_vehicle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plan_respects_corner_limit() {
        let track = Track::builtin();
        let p = Scenario::preset(ScenarioKind::FastLap).driver;
        let plan = speed_plan(&track, &p);
        for (i, v) in plan.iter().enumerate() {
            let k = track.curvature(i).abs();
            assert!(*v <= p.target_speed_mps + 1e-12);
            if k > 1e-6 {
                assert!(v * v * k <= p.lateral_accel_mps2 + 1e-9);
            }
        }
        assert!(plan.iter().any(|&v| (v - p.target_speed_mps).abs() < 1e-9));
    }

    #[test]
    fn follows_the_loop() {
        let track = Track::builtin();
        let vp = VehicleParams::default();
        let params = Scenario::preset(ScenarioKind::FastLap).driver;
        let mut d = Driver::new(&track, params, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = VehicleState::on_track(&track, 3.0, 20.0);
        let mut max_err: f64 = 0.0;
        for _ in 0..6000 {
            let c = d.command(&s, &track, &vp, 0.01, &mut rng);
            s = step_vehicle(&s, &track, &c, &vp, 0.01);
            let w = track.waypoint(s.track_idx);
            let (tx, ty) = track.tangent(s.track_idx);
            let lateral = (-(s.x - w.x) * ty + (s.y - w.y) * tx).abs();
            max_err = max_err.max(lateral);
        }
        assert!(max_err < 1.5, "cross-track error {max_err}");
        assert!(s.speed > 1.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_pi(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_pi(-0.5) + 0.5).abs() < 1e-12);
    }
}
