//! Power rails, current sensing, battery state and the temperature bus.
//!
//! Electrical constants are configuration. The defaults model a 4S 5000 mAh
//! 60C pack feeding a 16.8 V main rail (Hall-effect current sensor) and two
//! step-down rails at 5.1 V and 3.3 V (shunt sensing).

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

pub const DEFAULT_HALL_FLOOR_A: f64 = 5.0;
pub const HALL_FLOOR_SIGMA_A: f64 = 0.5;
pub const HALL_SCALE_ERROR: f64 = 0.01;
pub const SHUNT_SCALE_ERROR: f64 = 0.005;
pub const SHUNT_OFFSET_SIGMA_A: f64 = 0.001;

pub const DEFAULT_BUS_LATENCY_MS: u64 = 94;
pub const CRITICAL_SHIFT_C: f64 = 10.0;
pub const DEFAULT_THERMAL_WINDOW_S: f64 = 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("current must be non-negative, got {0} A")]
    NegativeCurrent(f64),
    #[error("time step must be positive, got {0} s")]
    BadTimeStep(f64),
    #[error("duplicate sensor id {0:#018x} on temperature bus")]
    BusConfigError(u64),
    #[error("history spans {have_s} s, need {need_s} s")]
    InsufficientData { have_s: f64, need_s: f64 },
    #[error("rail configuration: {0}")]
    BadRail(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurrentSensing {
    /// Hall-effect sensor, imprecise below `floor_a`.
    Hall { floor_a: f64 },
    /// Series shunt resistor; current from the voltage drop.
    Shunt { ohms: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RailSpec {
    pub name: &'static str,
    pub nominal_v: f64,
    pub max_i: f64,
    pub sensing: CurrentSensing,
}

impl RailSpec {
    pub fn main() -> Self {
        RailSpec {
            name: "main",
            nominal_v: 16.8,
            max_i: 300.0,
            sensing: CurrentSensing::Hall { floor_a: DEFAULT_HALL_FLOOR_A },
        }
    }

    pub fn v5() -> Self {
        RailSpec {
            name: "5v1",
            nominal_v: 5.1,
            max_i: 4.0,
            sensing: CurrentSensing::Shunt { ohms: 0.01 },
        }
    }

    pub fn v3() -> Self {
        RailSpec {
            name: "3v3",
            nominal_v: 3.3,
            max_i: 1.0,
            sensing: CurrentSensing::Shunt { ohms: 0.05 },
        }
    }

    /// Standard deviation of the measurement noise at `true_i`.
    pub fn noise_sigma(&self, true_i: f64) -> f64 {
        match self.sensing {
            CurrentSensing::Hall { floor_a } => {
                if true_i < floor_a {
                    HALL_FLOOR_SIGMA_A
                } else {
                    HALL_SCALE_ERROR * true_i
                }
            }
            CurrentSensing::Shunt { .. } => SHUNT_SCALE_ERROR * true_i + SHUNT_OFFSET_SIGMA_A,
        }
    }
}

/// The three rails in record order: main, 5.1 V, 3.3 V.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRails(pub [RailSpec; 3]);

impl Default for PowerRails {
    fn default() -> Self {
        PowerRails([RailSpec::main(), RailSpec::v5(), RailSpec::v3()])
    }
}

impl PowerRails {
    pub fn validate(&self) -> Result<(), PowerError> {
        for r in &self.0 {
            if !(r.nominal_v > 0.0) {
                return Err(PowerError::BadRail("nominal voltage must be positive"));
            }
            if !(r.max_i > 0.0) {
                return Err(PowerError::BadRail("max current must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentReading {
    pub measured_a: f64,
    /// True current exceeded 1.5× the rail rating.
    pub overcurrent: bool,
}

pub fn measure_current<R: Rng + ?Sized>(
    rail: &RailSpec,
    true_i: f64,
    rng: &mut R,
) -> Result<CurrentReading, PowerError> {
    if !(true_i >= 0.0) {
        return Err(PowerError::NegativeCurrent(true_i));
    }
    let noise = Normal::new(0.0, rail.noise_sigma(true_i))
        .expect("sigma is finite and positive")
        .sample(rng);
    Ok(CurrentReading {
        measured_a: true_i + noise,
        overcurrent: true_i > rail.max_i * 1.5,
    })
}

/// Open-circuit pack voltage against depth of discharge (0 = full).
const OCV_CURVE: [(f64, f64); 6] = [
    (0.0, 16.8),
    (0.1, 16.2),
    (0.3, 15.6),
    (0.7, 14.9),
    (0.9, 14.3),
    (1.0, 13.2),
];

pub fn open_circuit_voltage(depth: f64) -> f64 {
    let depth = depth.clamp(0.0, 1.0);
    for w in OCV_CURVE.windows(2) {
        let (d0, v0) = w[0];
        let (d1, v1) = w[1];
        if depth <= d1 {
            return v0 + (v1 - v0) * (depth - d0) / (d1 - d0);
        }
    }
    OCV_CURVE[OCV_CURVE.len() - 1].1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub cells: u32,
    pub capacity_mah: f64,
    pub c_rating: f64,
    pub internal_resistance_ohm: f64,
    pub low_threshold_v: f64,
    pub depleted_mah: f64,
    /// Terminal voltage under the most recent load.
    pub voltage_v: f64,
    pub last_current_a: f64,
    pub elapsed_s: f64,
    pub low: bool,
}

impl Default for BatteryState {
    fn default() -> Self {
        BatteryState {
            cells: 4,
            capacity_mah: 5000.0,
            c_rating: 60.0,
            internal_resistance_ohm: 0.01,
            low_threshold_v: 3.3 * 4.0,
            depleted_mah: 0.0,
            voltage_v: 16.8,
            last_current_a: 0.0,
            elapsed_s: 0.0,
            low: false,
        }
    }
}

impl BatteryState {
    /// Continuous discharge limit, C-rating times capacity.
    pub fn max_current_a(&self) -> f64 {
        self.c_rating * self.capacity_mah / 1000.0
    }

    pub fn depth_of_discharge(&self) -> f64 {
        self.depleted_mah / self.capacity_mah
    }

    pub fn open_circuit_v(&self) -> f64 {
        open_circuit_voltage(self.depth_of_discharge())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryStep {
    pub state: BatteryState,
    /// Draw exceeded the pack's C-rating.
    pub overload: bool,
}

/// Advances the pack by `dt_s` at a constant draw of `i_draw_a`.
pub fn step_battery(state: &BatteryState, i_draw_a: f64, dt_s: f64) -> Result<BatteryStep, PowerError> {
    if !(dt_s > 0.0) {
        return Err(PowerError::BadTimeStep(dt_s));
    }
    if !(i_draw_a >= 0.0) {
        return Err(PowerError::NegativeCurrent(i_draw_a));
    }
    let mut s = *state;
    s.elapsed_s += dt_s;
    if i_draw_a == 0.0 && state.last_current_a == 0.0 {
        return Ok(BatteryStep { state: s, overload: false });
    }
    s.depleted_mah = (s.depleted_mah + i_draw_a * dt_s / 3.6).min(s.capacity_mah);
    s.last_current_a = i_draw_a;
    s.voltage_v = (s.open_circuit_v() - i_draw_a * s.internal_resistance_ohm).max(0.0);
    s.low = s.voltage_v < s.low_threshold_v;
    Ok(BatteryStep {
        state: s,
        overload: i_draw_a > s.max_current_a(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorLocation {
    SteeringServo,
    Esc,
    Motor,
    BatteryPack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TempSensor {
    pub id: u64,
    pub location: SensorLocation,
    pub last_c: f64,
    pub last_read_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusRead {
    pub readings: Vec<(u64, f64)>,
    pub latency_ms: u64,
}

/// Reads every sensor on a shared one-wire bus. Conversions are serialized,
/// so latency grows linearly with the number of sensors.
pub fn read_temp_bus(sensors: &mut [TempSensor], now_ms: u64) -> Result<BusRead, PowerError> {
    read_temp_bus_with(sensors, now_ms, DEFAULT_BUS_LATENCY_MS)
}

pub fn read_temp_bus_with(
    sensors: &mut [TempSensor],
    now_ms: u64,
    per_sensor_ms: u64,
) -> Result<BusRead, PowerError> {
    let mut seen = HashSet::with_capacity(sensors.len());
    for s in sensors.iter() {
        if !seen.insert(s.id) {
            return Err(PowerError::BusConfigError(s.id));
        }
    }
    let mut readings = Vec::with_capacity(sensors.len());
    for (i, s) in sensors.iter_mut().enumerate() {
        s.last_read_ms = now_ms + (i as u64 + 1) * per_sensor_ms;
        readings.push((s.id, s.last_c));
    }
    Ok(BusRead {
        readings,
        latency_ms: sensors.len() as u64 * per_sensor_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalStatus {
    Nominal,
    Critical,
}

/// Classifies the last `window_s` seconds of `(t_s, °C)` samples. A spread of
/// 10 °C or more inside the window is critical.
pub fn thermal_alarm(history: &[(f64, f64)], window_s: f64) -> Result<ThermalStatus, PowerError> {
    let (Some(first), Some(last)) = (history.first(), history.last()) else {
        return Err(PowerError::InsufficientData { have_s: 0.0, need_s: window_s });
    };
    let span = last.0 - first.0;
    if span + 1e-9 < window_s {
        return Err(PowerError::InsufficientData { have_s: span, need_s: window_s });
    }
    let start = last.0 - window_s - 1e-9;
    let (lo, hi) = history
        .iter()
        .filter(|(t, _)| *t >= start)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, c)| (lo.min(c), hi.max(c)));
    Ok(if hi - lo >= CRITICAL_SHIFT_C {
        ThermalStatus::Critical
    } else {
        ThermalStatus::Nominal
    })
}

/// Streaming form of [`thermal_alarm`] for one sensor. Applies the same
/// spread rule to whatever history is available inside the window, so it
/// can flag a large shift before a full window has elapsed.
#[derive(Debug, Clone)]
pub struct ThermalMonitor {
    window_s: f64,
    samples: VecDeque<(f64, f64)>,
}

impl ThermalMonitor {
    pub fn new(window_s: f64) -> Self {
        ThermalMonitor { window_s, samples: VecDeque::new() }
    }

    pub fn push(&mut self, t_s: f64, temp_c: f64) -> ThermalStatus {
        self.samples.push_back((t_s, temp_c));
        while let Some(&(t0, _)) = self.samples.front() {
            if t_s - t0 > self.window_s + 1e-9 {
                self.samples.pop_front();
            } else {
                break;
            }
        }
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, c)| (lo.min(c), hi.max(c)));
        if hi - lo >= CRITICAL_SHIFT_C {
            ThermalStatus::Critical
        } else {
            ThermalStatus::Nominal
        }
    }

    /// Spread (max − min) currently inside the window.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, c)| (lo.min(c), hi.max(c)));
        if self.samples.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}
