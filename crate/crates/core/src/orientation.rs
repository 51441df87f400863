//! Quaternion and yaw/pitch/roll handling for the IMU stream.
//!
//! Euler angles follow the intrinsic Z-Y-X (yaw, then pitch, then roll)
//! convention, in degrees.

use std::ops::Mul;

use thiserror::Error;

/// Pitch magnitude beyond which yaw and roll are no longer trustworthy.
pub const DEFAULT_GIMBAL_LIMIT_DEG: f64 = 85.0;
const NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrientationError {
    #[error("quaternion has zero or non-finite norm")]
    DegenerateQuaternion,
    #[error("quaternion norm {0} is not 1")]
    NotNormalized(f64),
}

/// Scalar-first quaternion `a + b·i + c·j + d·k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { a: 1.0, b: 0.0, c: 0.0, d: 0.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Quaternion { a, b, c, d }
    }

    pub fn from_f32(q: [f32; 4]) -> Self {
        Quaternion::new(q[0] as f64, q[1] as f64, q[2] as f64, q[3] as f64)
    }

    pub fn to_f32(self) -> [f32; 4] {
        [self.a as f32, self.b as f32, self.c as f32, self.d as f32]
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.a, -self.b, -self.c, -self.d)
    }


    /// Largest per-component distance to `other`, taking the double cover
    /// (`q` and `-q` are the same rotation) into account.
    pub fn max_abs_diff_up_to_sign(&self, other: &Quaternion) -> f64 {
        let diff = |o: &Quaternion| {
            (self.a - o.a)
                .abs()
                .max((self.b - o.b).abs())
                .max((self.c - o.c).abs())
                .max((self.d - o.d).abs())
        };
        diff(other).min(diff(&-*other))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    // Hamilton product
    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion {
            a: l.a * r.a - l.b * r.b - l.c * r.c - l.d * r.d,
            b: l.a * r.b + l.b * r.a + l.c * r.d - l.d * r.c,
            c: l.a * r.c - l.b * r.d + l.c * r.a + l.d * r.b,
            d: l.a * r.d + l.b * r.c - l.c * r.b + l.d * r.a,
        }
    }
}

impl std::ops::Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.a, -self.b, -self.c, -self.d)
    }
}

/// Yaw, pitch and roll in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub const fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        EulerAngles { yaw, pitch, roll }
    }

    pub fn to_f32(self) -> [f32; 3] {
        [self.yaw as f32, self.pitch as f32, self.roll as f32]
    }
}

pub fn normalize(q: Quaternion) -> Result<Quaternion, OrientationError> {
    let n = q.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(OrientationError::DegenerateQuaternion);
    }
    Ok(Quaternion::new(q.a / n, q.b / n, q.c / n, q.d / n))
}

/// Maps an angle in degrees into (-180, 180].
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Unit quaternion to Z-Y-X Euler angles in degrees.
pub fn quat_to_euler(q: &Quaternion) -> Result<EulerAngles, OrientationError> {
    if !q.is_finite() {
        return Err(OrientationError::DegenerateQuaternion);
    }
    let n = q.norm();
    if (n - 1.0).abs() > NORM_TOLERANCE {
        return Err(OrientationError::NotNormalized(n));
    }
    let Quaternion { a, b, c, d } = *q;
    let yaw = f64::atan2(2.0 * (b * c + d * a), a * a + b * b - c * c - d * d);
    let pitch = (2.0 * (a * c - b * d)).clamp(-1.0, 1.0).asin();
    let roll = f64::atan2(2.0 * (c * d + b * a), a * a - b * b - c * c + d * d);
    Ok(EulerAngles {
        yaw: wrap_deg(yaw.to_degrees()),
        pitch: pitch.to_degrees(),
        roll: wrap_deg(roll.to_degrees()),
    })
}

/// Composes yaw about z, then pitch about the new y, then roll about the
/// new x. Angles outside the canonical ranges are accepted, so a continuous
/// pitch rotation beyond 90° (a tumble) can be expressed directly.
pub fn euler_to_quat(e: &EulerAngles) -> Quaternion {
    let (sy, cy) = (e.yaw.to_radians() * 0.5).sin_cos();
    let (sp, cp) = (e.pitch.to_radians() * 0.5).sin_cos();
    let (sr, cr) = (e.roll.to_radians() * 0.5).sin_cos();
    Quaternion {
        a: cr * cp * cy + sr * sp * sy,
        b: sr * cp * cy - cr * sp * sy,
        c: cr * sp * cy + sr * cp * sy,
        d: cr * cp * sy - sr * sp * cy,
    }
}

/// True when pitch is close enough to ±90° that yaw and roll are unreliable.
pub fn gimbal_guard(e: &EulerAngles) -> bool {
    gimbal_guard_with(e, DEFAULT_GIMBAL_LIMIT_DEG)
}

pub fn gimbal_guard_with(e: &EulerAngles, limit_deg: f64) -> bool {
    e.pitch.abs() > limit_deg
}
