//! Hall-effect wheel encoder: pulse timing to rotational and linear speed.
//!
//! Two estimators are provided. The period estimator converts the time
//! between pulses into a pulse frequency, which gives low latency at speed.
//! The count estimator counts pulses over a fixed task period, which still
//! produces a (zero) reading when the wheel stands still and no pulse ever
//! arrives. [`PulseTracker`] combines them per wheel.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

/// Magnets on the encoder ring of the reference vehicle.
pub const DEFAULT_MAGNETS: u32 = 14;
/// 1/8 truggy tyre diameter used when nothing else is configured.
pub const DEFAULT_WHEEL_DIAMETER_M: f64 = 0.12;
/// Inter-pulse intervals shorter than this are treated as sensor bounce.
pub const DEFAULT_MIN_PULSE_INTERVAL_S: f64 = 10e-6;
pub const DEFAULT_TICK_HZ: f64 = 10.0;
pub const DEFAULT_NO_PULSE_TIMEOUT_S: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncoderError {
    #[error("pulse at {cur} s does not follow previous pulse at {prev} s")]
    NonMonotonicPulse { prev: f64, cur: f64 },
    #[error("pulse interval {interval_s} s below glitch threshold {min_s} s")]
    GlitchRejected { interval_s: f64, min_s: f64 },
    #[error("counting window must be positive, got {0} s")]
    BadWindow(f64),
    #[error("invalid encoder configuration: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Magnets (pulses) per wheel revolution.
    pub magnet_count: u32,
    pub wheel_diameter_m: f64,
    pub min_pulse_interval_s: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            magnet_count: DEFAULT_MAGNETS,
            wheel_diameter_m: DEFAULT_WHEEL_DIAMETER_M,
            min_pulse_interval_s: DEFAULT_MIN_PULSE_INTERVAL_S,
        }
    }
}

impl EncoderConfig {
    pub fn new(magnet_count: u32, wheel_diameter_m: f64) -> Result<Self, EncoderError> {
        let cfg = EncoderConfig {
            magnet_count,
            wheel_diameter_m,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        if self.magnet_count == 0 {
            return Err(EncoderError::BadConfig("magnet count must be at least 1"));
        }
        if !(self.wheel_diameter_m > 0.0 && self.wheel_diameter_m.is_finite()) {
            return Err(EncoderError::BadConfig("wheel diameter must be positive"));
        }
        if !(self.min_pulse_interval_s >= 0.0) {
            return Err(EncoderError::BadConfig("glitch threshold must be non-negative"));
        }
        Ok(())
    }

    /// Linear speed in km/h of a wheel turning at `rpm`.
    pub fn rpm_to_kmh(&self, rpm: f64) -> f64 {
        rpm_to_kmh(rpm, self.wheel_diameter_m)
    }
}

/// Circumference times revolutions per hour, in km/h.
pub fn rpm_to_kmh(rpm: f64, wheel_diameter_m: f64) -> f64 {
    wheel_diameter_m * PI * rpm * 60.0 / 1000.0
}

/// A Hall sensor edge, seconds since session start.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PulseEvent {
    pub t: f64,
}

impl PulseEvent {
    pub fn at(t: f64) -> Self {
        PulseEvent { t }
    }
}

/// Which estimator produced a [`SpeedEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Period,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedEstimate {
    /// Inter-pulse interval (period method) or counting window (count method).
    pub t_delta_s: f64,
    pub pulse_freq_hz: f64,
    pub wheel_freq_hz: f64,
    pub omega_rpm: f64,
    pub linear_kmh: f64,
    /// Pulses counted; only set by the count method.
    pub pulse_count: Option<u32>,
    pub method: Method,
    pub valid: bool,
}

impl SpeedEstimate {
    pub fn zero(window_s: f64) -> Self {
        SpeedEstimate {
            t_delta_s: window_s,
            pulse_freq_hz: 0.0,
            wheel_freq_hz: 0.0,
            omega_rpm: 0.0,
            linear_kmh: 0.0,
            pulse_count: Some(0),
            method: Method::Count,
            valid: true,
        }
    }

    fn from_period(t_delta_s: f64, cfg: &EncoderConfig) -> Self {
        let pulse_freq_hz = 1.0 / t_delta_s;
        let wheel_freq_hz = pulse_freq_hz / cfg.magnet_count as f64;
        let omega_rpm = wheel_freq_hz * 60.0;
        SpeedEstimate {
            t_delta_s,
            pulse_freq_hz,
            wheel_freq_hz,
            omega_rpm,
            linear_kmh: cfg.rpm_to_kmh(omega_rpm),
            pulse_count: None,
            method: Method::Period,
            valid: true,
        }
    }
}

/// Period method: speed from the interval between two consecutive pulses.
pub fn speed_from_pulse_pair(
    prev: PulseEvent,
    cur: PulseEvent,
    cfg: &EncoderConfig,
) -> Result<SpeedEstimate, EncoderError> {
    cfg.validate()?;
    let t_delta = cur.t - prev.t;
    if !(t_delta > 0.0) {
        return Err(EncoderError::NonMonotonicPulse { prev: prev.t, cur: cur.t });
    }
    if t_delta < cfg.min_pulse_interval_s {
        return Err(EncoderError::GlitchRejected {
            interval_s: t_delta,
            min_s: cfg.min_pulse_interval_s,
        });
    }
    Ok(SpeedEstimate::from_period(t_delta, cfg))
}

/// Count method: `pulses` seen during a task period of `window_s` seconds.
pub fn speed_from_window(
    pulses: u32,
    window_s: f64,
    cfg: &EncoderConfig,
) -> Result<SpeedEstimate, EncoderError> {
    cfg.validate()?;
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(EncoderError::BadWindow(window_s));
    }
    let x = cfg.magnet_count as f64;
    let omega_rpm = pulses as f64 / (x * window_s) * 60.0;
    let pulse_freq_hz = pulses as f64 / window_s;
    Ok(SpeedEstimate {
        t_delta_s: window_s,
        pulse_freq_hz,
        wheel_freq_hz: pulse_freq_hz / x,
        omega_rpm,
        linear_kmh: cfg.rpm_to_kmh(omega_rpm),
        pulse_count: Some(pulses),
        method: Method::Count,
        valid: true,
    })
}

/// Per-wheel streaming estimator.
///
/// At every tick, if two or more pulses arrived since the previous tick the
/// period method is used over those pulses (anchored on the last pulse of the
/// previous tick when there is one). Otherwise the count method runs over a
/// stretched window equal to the no-pulse timeout, so a slow wheel still
/// reports a rate and a stopped wheel decays to exactly zero once its last
/// pulse is older than the timeout.
#[derive(Debug, Clone)]
pub struct PulseTracker {
    cfg: EncoderConfig,
    tick_period_s: f64,
    timeout_s: f64,
    last_tick_t: f64,
    // accepted pulses no older than the timeout, plus the newest anchor
    recent: VecDeque<f64>,
    last_pulse: Option<f64>,
    glitches: u64,
}

impl PulseTracker {
    pub fn new(cfg: EncoderConfig, tick_hz: f64) -> Result<Self, EncoderError> {
        Self::with_timeout(cfg, tick_hz, DEFAULT_NO_PULSE_TIMEOUT_S)
    }

    pub fn with_timeout(cfg: EncoderConfig, tick_hz: f64, timeout_s: f64) -> Result<Self, EncoderError> {
        cfg.validate()?;
        if !(tick_hz > 0.0) {
            return Err(EncoderError::BadConfig("tick rate must be positive"));
        }
        if !(timeout_s > 0.0) {
            return Err(EncoderError::BadConfig("timeout must be positive"));
        }
        Ok(PulseTracker {
            cfg,
            tick_period_s: 1.0 / tick_hz,
            timeout_s,
            last_tick_t: 0.0,
            recent: VecDeque::new(),
            last_pulse: None,
            glitches: 0,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    /// Pulses dropped by the bounce filter so far.
    pub fn glitches(&self) -> u64 {
        self.glitches
    }

    /// Feeds one pulse. Out-of-order pulses are an error; bounces are counted
    /// and dropped.
    pub fn push(&mut self, pulse: PulseEvent) -> Result<(), EncoderError> {
        if let Some(prev) = self.last_pulse {
            match speed_from_pulse_pair(PulseEvent::at(prev), pulse, &self.cfg) {
                Ok(_) => {}
                Err(EncoderError::GlitchRejected { .. }) => {
                    self.glitches += 1;
                    return Ok(());
                }
                Err(e) => return Err(e),
            }
        }
        self.last_pulse = Some(pulse.t);
        self.recent.push_back(pulse.t);
        Ok(())
    }

    /// Closes the tick ending at `now` and returns its estimate.
    pub fn tick(&mut self, now: f64) -> SpeedEstimate {
        let since = self.last_tick_t;
        self.last_tick_t = now;

        // keep everything inside the timeout horizon and one anchor before it
        let horizon = now - self.timeout_s;
        while self.recent.len() > 1 && self.recent[1] <= horizon {
            self.recent.pop_front();
        }

        let fresh_start = self.recent.partition_point(|&t| t <= since);
        let fresh = self.recent.len() - fresh_start;
        if fresh >= 2 {
            let last = self.recent[self.recent.len() - 1];
            let (anchor, intervals) = if fresh_start > 0 && self.recent[fresh_start] - self.recent[fresh_start - 1] <= self.timeout_s {
                (self.recent[fresh_start - 1], fresh)
            } else {
                (self.recent[fresh_start], fresh - 1)
            };
            return SpeedEstimate::from_period((last - anchor) / intervals as f64, &self.cfg);
        }

        match self.last_pulse {
            Some(t) if now - t < self.timeout_s - 1e-9 => {
                let n = self.recent.iter().filter(|&&p| p > horizon && p <= now).count() as u32;
                speed_from_window(n, self.timeout_s, &self.cfg)
                    .unwrap_or_else(|_| SpeedEstimate::zero(self.timeout_s))
            }
            _ => SpeedEstimate::zero(self.tick_period_s),
        }
    }
}

/// Runs a [`PulseTracker`] over a finished pulse list, producing one estimate
/// per tick from `1/tick_hz` up to `duration_s`.
pub fn track_pulse_stream(
    events: &[PulseEvent],
    cfg: &EncoderConfig,
    tick_hz: f64,
    duration_s: f64,
) -> Result<Vec<SpeedEstimate>, EncoderError> {
    let mut tracker = PulseTracker::new(*cfg, tick_hz)?;
    let ticks = (duration_s * tick_hz + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(ticks);
    let mut next = 0;
    for k in 1..=ticks {
        let now = k as f64 / tick_hz;
        while next < events.len() && events[next].t <= now {
            tracker.push(events[next])?;
            next += 1;
        }
        out.push(tracker.tick(now));
    }
    Ok(out)
}
