//! Scenario presets and the TOML configuration that overrides them.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo::GeoOrigin;
use crate::link::ChannelConfig;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SlowLap,
    FastLap,
    LockedRearDiff,
    Crash,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::SlowLap => "slow_lap",
            ScenarioKind::FastLap => "fast_lap",
            ScenarioKind::LockedRearDiff => "locked_rear_diff",
            ScenarioKind::Crash => "crash",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "slow_lap" => Ok(ScenarioKind::SlowLap),
            "fast_lap" => Ok(ScenarioKind::FastLap),
            "locked_rear_diff" => Ok(ScenarioKind::LockedRearDiff),
            "crash" => Ok(ScenarioKind::Crash),
            other => Err(SimError::BadConfig(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    /// Cruise speed on straights, m/s.
    pub target_speed_mps: f64,
    /// Cornering limit used to slow down for bends, m/s².
    pub lateral_accel_mps2: f64,
    /// Braking used when planning corner entry, m/s².
    pub brake_decel_mps2: f64,
    /// Scale on the steering disturbances the driver has to correct.
    pub steering_noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureParams {
    pub onset_s: f64,
    /// Front slip per unit throttle once the rear is undriven.
    pub slip_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashParams {
    pub time_s: f64,
    pub tumbles: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsParams {
    pub origin: GeoOrigin,
    pub sigma_m: f64,
    pub correlation_s: f64,
    pub dropout_prob: f64,
}

impl Default for GpsParams {
    fn default() -> Self {
        GpsParams { origin: GeoOrigin::default(), sigma_m: 0.5, correlation_s: 5.0, dropout_prob: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Timing jitter on encoder edges, seconds.
    pub pulse_jitter_s: f64,
    pub ambient_c: f64,
    /// Pitch/roll shake per unit of surface roughness, degrees.
    pub terrain_deg: f64,
    pub accel_sigma_mps2: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { pulse_jitter_s: 2e-6, ambient_c: 21.0, terrain_deg: 2.0, accel_sigma_mps2: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub laps: u32,
    pub seed: u64,
    pub tick_rate_hz: u16,
    /// Fixed run length. Without it the run stops shortly after the last lap.
    pub duration_s: Option<f64>,
    pub driver: DriverParams,
    pub failure: Option<FailureParams>,
    pub crash: Option<CrashParams>,
    pub gps: GpsParams,
    pub noise: NoiseParams,
    pub track_file: Option<PathBuf>,
    pub channel: ChannelConfig,
}

impl Scenario {
    pub fn preset(kind: ScenarioKind) -> Self {
        let slow = DriverParams {
            target_speed_mps: 2.6,
            lateral_accel_mps2: 1.5,
            brake_decel_mps2: 2.0,
            steering_noise: 1.0,
        };
        let (driver, duration_s, failure, crash) = match kind {
            ScenarioKind::SlowLap => (slow, Some(233.7), None, None),
            ScenarioKind::FastLap => (
                DriverParams { target_speed_mps: 7.0, lateral_accel_mps2: 5.0, brake_decel_mps2: 4.0, ..slow },
                Some(233.7),
                None,
                None,
            ),
            ScenarioKind::LockedRearDiff => (
                DriverParams { target_speed_mps: 3.0, lateral_accel_mps2: 2.0, ..slow },
                Some(120.0),
                Some(FailureParams { onset_s: 40.0, slip_gain: 1.5 }),
                None,
            ),
            ScenarioKind::Crash => (
                DriverParams { target_speed_mps: 5.0, lateral_accel_mps2: 3.5, brake_decel_mps2: 3.0, ..slow },
                None,
                None,
                Some(CrashParams { time_s: 30.0, tumbles: 2 }),
            ),
        };
        Scenario {
            kind,
            laps: 3,
            seed: 42,
            tick_rate_hz: 10,
            duration_s,
            driver,
            failure,
            crash,
            gps: GpsParams::default(),
            noise: NoiseParams::default(),
            track_file: None,
            channel: ChannelConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration_s: Option<f64>) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::BadConfig(m));
        if self.tick_rate_hz == 0 {
            return bad("tick_rate_hz must be positive".into());
        }
        if self.laps == 0 {
            return bad("laps must be at least 1".into());
        }
        if let Some(d) = self.duration_s {
            if !(d > 0.0 && d.is_finite()) {
                return bad(format!("duration_s = {d} must be positive"));
            }
        }
        let d = &self.driver;
        if !(d.target_speed_mps > 0.0 && d.lateral_accel_mps2 > 0.0 && d.brake_decel_mps2 > 0.0 && d.steering_noise >= 0.0) {
            return bad("driver parameters must be positive".into());
        }
        if let Some(c) = &self.crash {
            if !(1..=3).contains(&c.tumbles) {
                return bad(format!("crash.tumbles = {} must be 1..=3", c.tumbles));
            }
            if !(c.time_s >= 0.0) {
                return bad("crash.time_s must be non-negative".into());
            }
        }
        if let Some(f) = &self.failure {
            if !(f.onset_s >= 0.0 && f.slip_gain >= 0.0) {
                return bad("failure parameters must be non-negative".into());
            }
        }
        if !(0.0..=1.0).contains(&self.gps.dropout_prob) || !(self.gps.sigma_m >= 0.0) || !(self.gps.correlation_s > 0.0) {
            return bad("gps parameters out of range".into());
        }
        if !(self.gps.origin.lat.abs() < 89.0) {
            return bad("gps.origin_lat out of range".into());
        }
        self.channel.validate().map_err(|e| SimError::BadConfig(e.to_string()))
    }

    /// Reads a TOML scenario file. Only `scenario.name` is required; every
    /// other key overrides the preset for that scenario.
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| SimError::BadConfig(e.to_string()))?;
        file.resolve()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut sc = Scenario::from_toml(&text)?;
        // relative track paths are taken from the config's directory
        if let (Some(tf), Some(dir)) = (&sc.track_file, path.parent()) {
            if tf.is_relative() {
                sc.track_file = Some(dir.join(tf));
            }
        }
        Ok(sc)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    #[serde(default)]
    driver: DriverSection,
    #[serde(default)]
    failure: FailureSection,
    #[serde(default)]
    crash: CrashSection,
    #[serde(default)]
    track: TrackSection,
    #[serde(default)]
    gps: GpsSection,
    #[serde(default)]
    noise: NoiseSection,
    channel: Option<ChannelConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    name: String,
    laps: Option<u32>,
    seed: Option<u64>,
    tick_rate_hz: Option<u16>,
    duration_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DriverSection {
    target_speed_mps: Option<f64>,
    lateral_accel_mps2: Option<f64>,
    brake_decel_mps2: Option<f64>,
    steering_noise: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FailureSection {
    onset_s: Option<f64>,
    slip_gain: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrashSection {
    time_s: Option<f64>,
    tumbles: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackSection {
    file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpsSection {
    origin_lat: Option<f64>,
    origin_lon: Option<f64>,
    sigma_m: Option<f64>,
    correlation_s: Option<f64>,
    dropout_prob: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    pulse_jitter_s: Option<f64>,
    ambient_c: Option<f64>,
    terrain_deg: Option<f64>,
    accel_sigma_mps2: Option<f64>,
}

fn set<T>(dst: &mut T, src: Option<T>) {
    if let Some(v) = src {
        *dst = v;
    }
}

impl ConfigFile {
    fn resolve(self) -> Result<Scenario, SimError> {
        let kind: ScenarioKind = self.scenario.name.parse()?;
        let mut sc = Scenario::preset(kind);
        set(&mut sc.laps, self.scenario.laps);
        set(&mut sc.seed, self.scenario.seed);
        set(&mut sc.tick_rate_hz, self.scenario.tick_rate_hz);
        if self.scenario.duration_s.is_some() {
            sc.duration_s = self.scenario.duration_s;
        }

        let d = &mut sc.driver;
        set(&mut d.target_speed_mps, self.driver.target_speed_mps);
        set(&mut d.lateral_accel_mps2, self.driver.lateral_accel_mps2);
        set(&mut d.brake_decel_mps2, self.driver.brake_decel_mps2);
        set(&mut d.steering_noise, self.driver.steering_noise);

        match (&mut sc.failure, self.failure.onset_s.is_some() || self.failure.slip_gain.is_some()) {
            (Some(f), _) => {
                set(&mut f.onset_s, self.failure.onset_s);
                set(&mut f.slip_gain, self.failure.slip_gain);
            }
            (None, true) => return Err(SimError::BadConfig(format!("[failure] does not apply to {kind}"))),
            (None, false) => {}
        }
        match (&mut sc.crash, self.crash.time_s.is_some() || self.crash.tumbles.is_some()) {
            (Some(c), _) => {
                set(&mut c.time_s, self.crash.time_s);
                set(&mut c.tumbles, self.crash.tumbles);
            }
            (None, true) => return Err(SimError::BadConfig(format!("[crash] does not apply to {kind}"))),
            (None, false) => {}
        }

        sc.track_file = self.track.file;
        let g = &mut sc.gps;
        set(&mut g.origin.lat, self.gps.origin_lat);
        set(&mut g.origin.lon, self.gps.origin_lon);
        set(&mut g.sigma_m, self.gps.sigma_m);
        set(&mut g.correlation_s, self.gps.correlation_s);
        set(&mut g.dropout_prob, self.gps.dropout_prob);

        let n = &mut sc.noise;
        set(&mut n.pulse_jitter_s, self.noise.pulse_jitter_s);
        set(&mut n.ambient_c, self.noise.ambient_c);
        set(&mut n.terrain_deg, self.noise.terrain_deg);
        set(&mut n.accel_sigma_mps2, self.noise.accel_sigma_mps2);

        set(&mut sc.channel, self.channel);
        sc.validate()?;
        Ok(sc)
    }
}
