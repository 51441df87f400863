//! The canonical telemetry record and its fixed 228-byte wire layout.
//!
//! Every sample the acquisition loop produces is packed into one
//! [`TelemetryRecord`]. The binary form is little-endian with fixed offsets:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0   | 4  | `seq` (u32) |
//! | 4   | 8  | `timestamp_ms` (u64) |
//! | 12  | 16 | `wheel_speed_rpm` (4 × f32: FL, FR, RL, RR) |
//! | 28  | 4  | `motor_speed_rpm` (f32) |
//! | 32  | 16 | `quat` (4 × f32: a, b, c, d) |
//! | 48  | 12 | `euler_deg` (3 × f32: yaw, pitch, roll) |
//! | 60  | 12 | `accel_mps2` (3 × f32: x, y, z) |
//! | 72  | 8  | `gps_lat` (f64) |
//! | 80  | 8  | `gps_lon` (f64) |
//! | 88  | 4  | `gps_speed_kmh` (f32) |
//! | 92  | 16 | `temps_c` (4 × f32: servo, esc, motor, battery pack) |
//! | 108 | 12 | `rail_v` (3 × f32: main, 5.1 V, 3.3 V) |
//! | 120 | 12 | `rail_i` (3 × f32) |
//! | 132 | 2  | `servo_pwm_us` (u16) |
//! | 134 | 2  | `throttle_pwm_us` (u16) |
//! | 136 | 2  | `status_flags` (u16) |
//! | 138 | 1  | `gps_fix` (u8) |
//! | 139 | 1  | `gps_sats` (u8) |
//! | 140 | 4  | CRC-32 over bytes `0..140` |
//! | 144 | 84 | reserved, always zero |

use bitflags::bitflags;
use thiserror::Error;

/// Serialized record size in bytes.
pub const RECORD_SIZE: usize = 228;
/// Bytes covered by the CRC.
pub const CONTENT_SIZE: usize = 140;
const CRC_OFFSET: usize = CONTENT_SIZE;
const PADDING_OFFSET: usize = CRC_OFFSET + 4;

/// Plausible range of the temperature sensors, °C.
pub const TEMP_RANGE_C: (f32, f32) = (-55.0, 150.0);
/// Plausible range of the rail voltage readings, V.
pub const RAIL_V_RANGE: (f32, f32) = (0.0, 20.0);

bitflags! {
    /// Status bits carried in every record.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct StatusFlags: u16 {
        const GPS_FIX_VALID = 1 << 0;
        const THERMAL_ALARM = 1 << 1;
        const BATTERY_LOW = 1 << 2;
        const CRASH_DETECTED = 1 << 3;
        const DIFF_FAILURE_SUSPECTED = 1 << 4;
    }
}

/// GPS fix quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[repr(u8)]
pub enum GpsFix {
    #[default]
    None = 0,
    Fix2d = 1,
    Fix3d = 2,
}

impl GpsFix {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(GpsFix::None),
            1 => Some(GpsFix::Fix2d),
            2 => Some(GpsFix::Fix3d),
            _ => None,
        }
    }

    pub fn is_valid(self) -> bool {
        self != GpsFix::None
    }
}

/// Index of each wheel in [`TelemetryRecord::wheel_speed_rpm`].
pub mod wheel {
    pub const FL: usize = 0;
    pub const FR: usize = 1;
    pub const RL: usize = 2;
    pub const RR: usize = 3;
}

/// Index of each sensor in [`TelemetryRecord::temps_c`].
pub mod temp {
    pub const SERVO: usize = 0;
    pub const ESC: usize = 1;
    pub const MOTOR: usize = 2;
    pub const BATTERY: usize = 3;
}

/// Index of each rail in [`TelemetryRecord::rail_v`] / [`TelemetryRecord::rail_i`].
pub mod rail {
    pub const MAIN: usize = 0;
    pub const V5: usize = 1;
    pub const V3: usize = 2;
}

/// One sensor snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TelemetryRecord {
    pub seq: u32,
    pub timestamp_ms: u64,
    pub wheel_speed_rpm: [f32; 4],
    pub motor_speed_rpm: f32,
    pub quat: [f32; 4],
    pub euler_deg: [f32; 3],
    pub accel_mps2: [f32; 3],
    pub gps_lat: f64,
    pub gps_lon: f64,
    pub gps_speed_kmh: f32,
    pub temps_c: [f32; 4],
    pub rail_v: [f32; 3],
    pub rail_i: [f32; 3],
    pub servo_pwm_us: u16,
    pub throttle_pwm_us: u16,
    pub status_flags: u16,
    pub gps_fix: u8,
    pub gps_sats: u8,
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("corrupt record: {0}")]
    CorruptRecord(&'static str),
}

impl TelemetryRecord {
    pub fn flags(&self) -> StatusFlags {
        StatusFlags::from_bits_truncate(self.status_flags)
    }

    pub fn set_flag(&mut self, flag: StatusFlags, on: bool) {
        let mut f = self.flags();
        f.set(flag, on);
        self.status_flags = f.bits();
    }

    pub fn has_gps_fix(&self) -> bool {
        self.flags().contains(StatusFlags::GPS_FIX_VALID) && self.gps_fix != 0
    }

    /// Checks the value-level invariants a record must satisfy before it is
    /// serialized.
    pub fn validate(&self) -> Result<(), RecordError> {
        let floats = self
            .wheel_speed_rpm
            .iter()
            .chain(std::iter::once(&self.motor_speed_rpm))
            .chain(self.quat.iter())
            .chain(self.euler_deg.iter())
            .chain(self.accel_mps2.iter())
            .chain(std::iter::once(&self.gps_speed_kmh))
            .chain(self.temps_c.iter())
            .chain(self.rail_v.iter())
            .chain(self.rail_i.iter());
        for (i, v) in floats.enumerate() {
            if !v.is_finite() {
                return Err(RecordError::InvalidRecord(format!(
                    "non-finite value in float field #{i}"
                )));
            }
        }
        if !self.gps_lat.is_finite() || !self.gps_lon.is_finite() {
            return Err(RecordError::InvalidRecord("non-finite GPS coordinate".into()));
        }
        for t in self.temps_c {
            if t < TEMP_RANGE_C.0 || t > TEMP_RANGE_C.1 {
                return Err(RecordError::InvalidRecord(format!(
                    "temperature {t} °C out of sensor range"
                )));
            }
        }
        for v in self.rail_v {
            if v < RAIL_V_RANGE.0 || v > RAIL_V_RANGE.1 {
                return Err(RecordError::InvalidRecord(format!(
                    "rail voltage {v} V out of range"
                )));
            }
        }
        if self.status_flags & !StatusFlags::all().bits() != 0 {
            return Err(RecordError::InvalidRecord("reserved status bits set".into()));
        }
        if GpsFix::from_u8(self.gps_fix).is_none() {
            return Err(RecordError::InvalidRecord(format!(
                "unknown gps fix code {}",
                self.gps_fix
            )));
        }
        Ok(())
    }
}

struct Writer<'a> {
    buf: &'a mut [u8; RECORD_SIZE],
    pos: usize,
}

impl Writer<'_> {
    fn put(&mut self, bytes: &[u8]) {
        self.buf[self.pos..self.pos + bytes.len()].copy_from_slice(bytes);
        self.pos += bytes.len();
    }

    fn f32s(&mut self, vals: &[f32]) {
        for v in vals {
            self.put(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }

    fn f32s<const N: usize>(&mut self) -> [f32; N] {
        let mut out = [0f32; N];
        for v in out.iter_mut() {
            *v = self.f32();
        }
        out
    }
}

/// Packs a record into its 228-byte wire form, filling in the CRC.
pub fn serialize_record(rec: &TelemetryRecord) -> Result<[u8; RECORD_SIZE], RecordError> {
    rec.validate()?;
    let mut buf = [0u8; RECORD_SIZE];
    let mut w = Writer { buf: &mut buf, pos: 0 };
    w.put(&rec.seq.to_le_bytes());
    w.put(&rec.timestamp_ms.to_le_bytes());
    w.f32s(&rec.wheel_speed_rpm);
    w.f32s(&[rec.motor_speed_rpm]);
    w.f32s(&rec.quat);
    w.f32s(&rec.euler_deg);
    w.f32s(&rec.accel_mps2);
    w.put(&rec.gps_lat.to_le_bytes());
    w.put(&rec.gps_lon.to_le_bytes());
    w.f32s(&[rec.gps_speed_kmh]);
    w.f32s(&rec.temps_c);
    w.f32s(&rec.rail_v);
    w.f32s(&rec.rail_i);
    w.put(&rec.servo_pwm_us.to_le_bytes());
    w.put(&rec.throttle_pwm_us.to_le_bytes());
    w.put(&rec.status_flags.to_le_bytes());
    w.put(&[rec.gps_fix, rec.gps_sats]);
    debug_assert_eq!(w.pos, CONTENT_SIZE);
    let crc = crc32fast::hash(&buf[..CONTENT_SIZE]);
    buf[CRC_OFFSET..PADDING_OFFSET].copy_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

/// Unpacks and integrity-checks a 228-byte record.
pub fn deserialize_record(buf: &[u8]) -> Result<TelemetryRecord, RecordError> {
    if buf.len() != RECORD_SIZE {
        return Err(RecordError::BadLength {
            expected: RECORD_SIZE,
            actual: buf.len(),
        });
    }
    let stored = u32::from_le_bytes(buf[CRC_OFFSET..PADDING_OFFSET].try_into().unwrap());
    if crc32fast::hash(&buf[..CONTENT_SIZE]) != stored {
        return Err(RecordError::CorruptRecord("crc mismatch"));
    }
    if buf[PADDING_OFFSET..].iter().any(|&b| b != 0) {
        return Err(RecordError::CorruptRecord("nonzero padding"));
    }
    let mut r = Reader { buf, pos: 0 };
    let rec = TelemetryRecord {
        seq: u32::from_le_bytes(r.take()),
        timestamp_ms: u64::from_le_bytes(r.take()),
        wheel_speed_rpm: r.f32s(),
        motor_speed_rpm: r.f32(),
        quat: r.f32s(),
        euler_deg: r.f32s(),
        accel_mps2: r.f32s(),
        gps_lat: f64::from_le_bytes(r.take()),
        gps_lon: f64::from_le_bytes(r.take()),
        gps_speed_kmh: r.f32(),
        temps_c: r.f32s(),
        rail_v: r.f32s(),
        rail_i: r.f32s(),
        servo_pwm_us: u16::from_le_bytes(r.take()),
        throttle_pwm_us: u16::from_le_bytes(r.take()),
        status_flags: u16::from_le_bytes(r.take()),
        gps_fix: r.take::<1>()[0],
        gps_sats: r.take::<1>()[0],
    };
    debug_assert_eq!(r.pos, CONTENT_SIZE);
    Ok(rec)
}
