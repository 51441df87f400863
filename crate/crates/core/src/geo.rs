//! Local flat-earth conversion between track metres and WGS-84 degrees.

use serde::{Deserialize, Serialize};

const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat: f64,
    pub lon: f64,
}

impl Default for GeoOrigin {
    fn default() -> Self {
        GeoOrigin { lat: 50.85, lon: 4.35 }
    }
}

impl GeoOrigin {
    /// East/north metres to latitude/longitude.
    pub fn to_latlon(&self, x: f64, y: f64) -> (f64, f64) {
        let lat = self.lat + (y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon + (x / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }

    pub fn to_xy(&self, lat: f64, lon: f64) -> (f64, f64) {
        let y = (lat - self.lat).to_radians() * EARTH_RADIUS_M;
        let x = (lon - self.lon).to_radians() * EARTH_RADIUS_M * self.lat.to_radians().cos();
        (x, y)
    }
}

/// A directed gate across the track. Crossings count only when moving along
/// `(dir_x, dir_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StartLine {
    pub x: f64,
    pub y: f64,
    pub dir_x: f64,
    pub dir_y: f64,
    pub half_width: f64,
}

impl StartLine {
    /// Fraction along `p0 -> p1` at which the segment crosses the gate in the
    /// forward direction.
    pub fn crossing(&self, p0: (f64, f64), p1: (f64, f64)) -> Option<f64> {
        let along = |p: (f64, f64)| (p.0 - self.x) * self.dir_x + (p.1 - self.y) * self.dir_y;
        let (a0, a1) = (along(p0), along(p1));
        if !(a0 < 0.0 && a1 >= 0.0) {
            return None;
        }
        let f = a0 / (a0 - a1);
        let cx = p0.0 + f * (p1.0 - p0.0) - self.x;
        let cy = p0.1 + f * (p1.1 - p0.1) - self.y;
        // lateral offset along the gate
        let lateral = -cx * self.dir_y + cy * self.dir_x;
        (lateral.abs() <= self.half_width).then_some(f)
    }
}
