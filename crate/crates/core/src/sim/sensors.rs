//! Turns the true vehicle state into what the onboard sensors report.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::encoder::{EncoderConfig, PulseEvent, PulseTracker};
use crate::orientation::{euler_to_quat, quat_to_euler, EulerAngles};
use crate::power_thermal::{
    measure_current, read_temp_bus, PowerRails, SensorLocation, TempSensor, ThermalMonitor, ThermalStatus,
    DEFAULT_THERMAL_WINDOW_S,
};
use crate::record::{rail, GpsFix, StatusFlags, TelemetryRecord};

use super::scenario::Scenario;
use super::vehicle::{VehicleParams, VehicleState};
use super::SimError;

const MOTOR_POLES: u32 = 2;
const TEMP_LSB_C: f64 = 1.0 / 16.0;
const GPS_SATS: u8 = 10;

/// One wheel's magnet ring feeding a pulse tracker.
#[derive(Debug, Clone)]
struct PulseChannel {
    tracker: PulseTracker,
    magnets: f64,
    phase: f64,
    last_t: f64,
}

impl PulseChannel {
    fn new(cfg: EncoderConfig, tick_hz: f64) -> Result<Self, SimError> {
        Ok(PulseChannel {
            magnets: cfg.magnet_count as f64,
            tracker: PulseTracker::new(cfg, tick_hz).map_err(|e| SimError::BadConfig(e.to_string()))?,
            phase: 0.0,
            last_t: f64::NEG_INFINITY,
        })
    }

    /// Emits the pulses of a shaft turning at `omega` rad/s over
    /// `[t0, t0 + dt]`.
    fn advance(&mut self, omega: f64, t0: f64, dt: f64, jitter_s: f64, rng: &mut ChaCha8Rng) {
        let before = self.phase;
        let after = before + omega.max(0.0) * dt / std::f64::consts::TAU * self.magnets;
        let mut k = before.floor() + 1.0;
        while k <= after {
            let f = (k - before) / (after - before);
            let n: f64 = rng.sample(StandardNormal);
            let t = (t0 + f * dt + jitter_s * n).max(self.last_t + 1e-7);
            self.last_t = t;
            // bounces and ordering faults are the tracker's to count
            let _ = self.tracker.push(PulseEvent::at(t));
            k += 1.0;
        }
        self.phase = after.rem_euclid(self.magnets * 1e6);
    }

    fn read_rpm(&mut self, now: f64) -> f64 {
        self.tracker.tick(now).omega_rpm
    }
}

#[derive(Debug, Clone)]
pub struct SensorSuite {
    wheels: Vec<PulseChannel>,
    motor: PulseChannel,
    gps_err: (f64, f64),
    temp_sensors: Vec<TempSensor>,
    next_bus_read_ms: u64,
    thermal_monitors: Vec<ThermalMonitor>,
    rails: PowerRails,
    jitter_s: f64,
    accel_sigma: f64,
}

/// What the onboard firmware would compute about itself, folded into the
/// record's status bits by the caller.
#[derive(Debug, Clone, Copy, Default)]
pub struct Onboard {
    pub thermal_alarm: bool,
}

impl SensorSuite {
    pub fn new(sc: &Scenario, vp: &VehicleParams) -> Result<Self, SimError> {
        let tick_hz = sc.tick_rate_hz as f64;
        let wheel_cfg = EncoderConfig::new(crate::encoder::DEFAULT_MAGNETS, vp.wheel_diameter_m)
            .map_err(|e| SimError::BadConfig(e.to_string()))?;
        let motor_cfg =
            EncoderConfig::new(MOTOR_POLES, vp.wheel_diameter_m).map_err(|e| SimError::BadConfig(e.to_string()))?;
        let wheels = (0..4).map(|_| PulseChannel::new(wheel_cfg, tick_hz)).collect::<Result<_, _>>()?;
        let locations = [
            SensorLocation::SteeringServo,
            SensorLocation::Esc,
            SensorLocation::Motor,
            SensorLocation::BatteryPack,
        ];
        let temp_sensors = locations
            .iter()
            .enumerate()
            .map(|(i, &location)| TempSensor {
                id: 0x28_0000_0000_0000 + i as u64,
                location,
                last_c: sc.noise.ambient_c,
                last_read_ms: 0,
            })
            .collect();
        Ok(SensorSuite {
            wheels,
            motor: PulseChannel::new(motor_cfg, tick_hz)?,
            gps_err: (0.0, 0.0),
            temp_sensors,
            next_bus_read_ms: 0,
            thermal_monitors: (0..4).map(|_| ThermalMonitor::new(DEFAULT_THERMAL_WINDOW_S)).collect(),
            rails: PowerRails::default(),
            jitter_s: sc.noise.pulse_jitter_s,
            accel_sigma: sc.noise.accel_sigma_mps2,
        })
    }

    /// Feeds one physics sub-step of shaft rotation to the encoders.
    pub fn substep(&mut self, state: &VehicleState, t0: f64, dt: f64, rng: &mut ChaCha8Rng) {
        for (ch, &omega) in self.wheels.iter_mut().zip(&state.wheel_omega) {
            ch.advance(omega, t0, dt, self.jitter_s, rng);
        }
        self.motor.advance(state.motor_omega, t0, dt, self.jitter_s, rng);
    }

    /// Samples every sensor at the end of a tick.
    pub fn sample(
        &mut self,
        state: &VehicleState,
        sc: &Scenario,
        vp: &VehicleParams,
        seq: u32,
        timestamp_ms: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(TelemetryRecord, Onboard), SimError> {
        let now = timestamp_ms as f64 / 1000.0;
        let mut rec = TelemetryRecord { seq, timestamp_ms, ..Default::default() };
        for (k, ch) in self.wheels.iter_mut().enumerate() {
            rec.wheel_speed_rpm[k] = ch.read_rpm(now) as f32;
        }
        rec.motor_speed_rpm = self.motor.read_rpm(now) as f32;

        let euler = EulerAngles::new(
            state.heading.to_degrees(),
            state.pitch.to_degrees(),
            state.roll.to_degrees(),
        );
        let q = euler_to_quat(&euler);
        rec.quat = q.to_f32();
        rec.euler_deg = quat_to_euler(&q).map_err(|e| SimError::BadConfig(e.to_string()))?.to_f32();

        let mut noise = |s: f64| s * rng.sample::<f64, _>(StandardNormal);
        let g = 9.81 * state.pitch.cos() * state.roll.cos();
        rec.accel_mps2 = [
            (state.accel_long + noise(self.accel_sigma)) as f32,
            (state.accel_lat + noise(self.accel_sigma)) as f32,
            (g + noise(self.accel_sigma)) as f32,
        ];

        // Gauss-Markov position error, correlated over seconds
        let dt = 1.0 / sc.tick_rate_hz as f64;
        let phi = (-dt / sc.gps.correlation_s).exp();
        let drive = sc.gps.sigma_m * (1.0 - phi * phi).sqrt();
        self.gps_err.0 = phi * self.gps_err.0 + noise(drive);
        self.gps_err.1 = phi * self.gps_err.1 + noise(drive);
        let dropped = rng.random::<f64>() < sc.gps.dropout_prob;
        if !dropped {
            let (lat, lon) = sc.gps.origin.to_latlon(state.x + self.gps_err.0, state.y + self.gps_err.1);
            rec.gps_lat = lat;
            rec.gps_lon = lon;
            rec.gps_speed_kmh = (state.speed * 3.6 + rng.sample::<f64, _>(StandardNormal) * 0.1).max(0.0) as f32;
            rec.gps_fix = GpsFix::Fix3d as u8;
            rec.gps_sats = GPS_SATS;
        }

        // one-wire bus: sample-and-hold, refreshed once per full bus sweep
        if timestamp_ms >= self.next_bus_read_ms {
            for (s, &t) in self.temp_sensors.iter_mut().zip(&state.temps_c) {
                s.last_c = (t / TEMP_LSB_C).round() * TEMP_LSB_C;
            }
            let read = read_temp_bus(&mut self.temp_sensors, timestamp_ms)
                .map_err(|e| SimError::BadConfig(e.to_string()))?;
            self.next_bus_read_ms = timestamp_ms + read.latency_ms;
        }
        let mut thermal_alarm = false;
        for (k, s) in self.temp_sensors.iter().enumerate() {
            rec.temps_c[k] = s.last_c as f32;
            thermal_alarm |= self.thermal_monitors[k].push(now, s.last_c) == ThermalStatus::Critical;
        }

        let true_i = [state.motor_current_a(vp) + 1.0, state.servo_current_a(), 0.12];
        for (k, spec) in self.rails.0.iter().enumerate() {
            let reading = measure_current(spec, true_i[k], rng).map_err(|e| SimError::BadConfig(e.to_string()))?;
            rec.rail_i[k] = reading.measured_a as f32;
        }
        let mut noise = |s: f64| s * rng.sample::<f64, _>(StandardNormal);
        rec.rail_v[rail::MAIN] = (state.battery.voltage_v + noise(0.01)) as f32;
        rec.rail_v[rail::V5] = (5.1 + noise(0.01)) as f32;
        rec.rail_v[rail::V3] = (3.3 + noise(0.005)) as f32;

        rec.servo_pwm_us = pwm(state.steer);
        rec.throttle_pwm_us = pwm(state.throttle);

        let mut flags = StatusFlags::empty();
        flags.set(StatusFlags::GPS_FIX_VALID, !dropped);
        flags.set(StatusFlags::THERMAL_ALARM, thermal_alarm);
        flags.set(StatusFlags::BATTERY_LOW, state.battery.low);
        rec.status_flags = flags.bits();
        Ok((rec, Onboard { thermal_alarm }))
    }
}

/// Maps a command in [-1, 1] onto a 1000–2000 µs servo pulse.
pub fn pwm(cmd: f64) -> u16 {
    (1500.0 + 500.0 * cmd.clamp(-1.0, 1.0)).round() as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn pwm_mapping() {
        assert_eq!(pwm(0.0), 1500);
        assert_eq!(pwm(1.0), 2000);
        assert_eq!(pwm(-1.0), 1000);
        assert_eq!(pwm(3.0), 2000);
        assert_eq!(pwm(0.2), 1600);
    }

    #[test]
    fn pulse_channel_reproduces_rate() {
        let cfg = EncoderConfig::default();
        let mut ch = PulseChannel::new(cfg, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 5 rev/s
        let omega = 5.0 * std::f64::consts::TAU;
        let mut rpm = 0.0;
        for tick in 0..20 {
            for sub in 0..10 {
                let t0 = tick as f64 * 0.1 + sub as f64 * 0.01;
                ch.advance(omega, t0, 0.01, 2e-6, &mut rng);
            }
            rpm = ch.read_rpm((tick + 1) as f64 * 0.1);
        }
        assert!((rpm - 300.0).abs() < 0.5, "{rpm}");
    }

    #[test]
    fn stationary_reads_zero() {
        let cfg = EncoderConfig::default();
        let mut ch = PulseChannel::new(cfg, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for tick in 0..10 {
            ch.advance(0.0, tick as f64 * 0.1, 0.1, 2e-6, &mut rng);
            assert_eq!(ch.read_rpm((tick + 1) as f64 * 0.1), 0.0);
        }
    }
}
