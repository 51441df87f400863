//! Closed-loop track geometry.

use std::f64::consts::PI;
use std::path::Path;

use crate::geo::StartLine;

use super::SimError;

const SPACING_M: f64 = 0.5;
const GATE_HALF_WIDTH_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Surface roughness of the segment starting at this waypoint.
    pub roughness: f64,
}

/// A one-way closed loop. The start line sits at waypoint 0 facing waypoint 1.
#[derive(Debug, Clone)]
pub struct Track {
    points: Vec<Waypoint>,
    // arc length at each waypoint; cum[n] is the full loop
    cum: Vec<f64>,
    curvature: Vec<f64>,
}

impl Track {
    pub fn new(points: Vec<Waypoint>) -> Result<Self, SimError> {
        if points.len() < 4 {
            return Err(SimError::BadTrack(format!("need at least 4 waypoints, got {}", points.len())));
        }
        let n = points.len();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            let len = (b.x - a.x).hypot(b.y - a.y);
            if !(len > 1e-9) || !a.x.is_finite() || !a.y.is_finite() || !a.z.is_finite() {
                return Err(SimError::BadTrack(format!("degenerate segment at waypoint {i}")));
            }
            cum.push(cum[i] + len);
        }
        let curvature = (0..n)
            .map(|i| {
                let p = points[(i + n - 1) % n];
                let q = points[i];
                let r = points[(i + 1) % n];
                menger_curvature(p, q, r)
            })
            .collect();
        Ok(Track { points, cum, curvature })
    }

    /// Built-in test loop, driven clockwise: a 40 m straight with a hill, a
    /// right hairpin, a left-right chicane, a rough straight, a second right
    /// hairpin and a short closing straight.
    pub fn builtin() -> Self {
        let mut b = Builder::new();
        b.straight(40.0, 0.2, |s| {
            if (10.0..=30.0).contains(&s) {
                1.5 * (PI * (s - 10.0) / 20.0).sin().powi(2)
            } else {
                0.0
            }
        });
        b.arc(8.0, -PI, 0.2);
        b.straight(15.0, 0.2, |_| 0.0);
        b.arc(4.0, PI / 2.0, 0.2);
        b.arc(4.0, -PI / 2.0, 0.2);
        b.straight(25.0, 1.0, |_| 0.0);
        b.arc(12.0, -PI, 0.2);
        b.straight(8.0, 0.2, |_| 0.0);
        Track::new(b.finish()).expect("built-in track is valid")
    }

    /// Parses whitespace-separated `x y z roughness` lines. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
            match vals {
                Ok(v) if v.len() == 4 => points.push(Waypoint { x: v[0], y: v[1], z: v[2], roughness: v[3] }),
                _ => {
                    return Err(SimError::BadTrack(format!(
                        "line {}: expected `x y z roughness`",
                        lineno + 1
                    )))
                }
            }
        }
        Track::new(points)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Track::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# x y z roughness\n");
        for p in &self.points {
            out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.z, p.roughness));
        }
        out
    }

    pub fn points(&self) -> &[Waypoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length_m(&self) -> f64 {
        self.cum[self.points.len()]
    }

    pub fn arc_length(&self, idx: usize) -> f64 {
        self.cum[idx % self.points.len()]
    }

    pub fn curvature(&self, idx: usize) -> f64 {
        self.curvature[idx % self.points.len()]
    }

    pub fn roughness(&self, idx: usize) -> f64 {
        self.points[idx % self.points.len()].roughness
    }

    pub fn waypoint(&self, idx: usize) -> Waypoint {
        self.points[idx % self.points.len()]
    }

    /// Unit tangent of the segment starting at `idx`.
    pub fn tangent(&self, idx: usize) -> (f64, f64) {
        let n = self.points.len();
        let (a, b) = (self.points[idx % n], self.points[(idx + 1) % n]);
        let len = (b.x - a.x).hypot(b.y - a.y);
        ((b.x - a.x) / len, (b.y - a.y) / len)
    }

    /// Rise over run of the segment starting at `idx`.
    pub fn grade(&self, idx: usize) -> f64 {
        let n = self.points.len();
        let i = idx % n;
        let (a, b) = (self.points[i], self.points[(i + 1) % n]);
        (b.z - a.z) / (self.cum[i + 1] - self.cum[i])
    }

    /// Nearest segment to `(x, y)`, searching forward from `hint`. Returns the
    /// segment index and the projection fraction along it.
    pub fn locate(&self, x: f64, y: f64, hint: usize) -> (usize, f64) {
        let n = self.points.len();
        let mut best = (f64::INFINITY, hint % n, 0.0);
        let back = 5.min(n);
        for k in 0..n.min(60) {
            let i = (hint % n + n - back + k) % n;
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let f = (((x - a.x) * dx + (y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let d = (a.x + f * dx - x).hypot(a.y + f * dy - y);
            if d < best.0 {
                best = (d, i, f);
            }
        }
        (best.1, best.2)
    }

    /// Full search, used once to seed [`Track::locate`].
    pub fn locate_global(&self, x: f64, y: f64) -> (usize, f64) {
        let n = self.points.len();
        let mut best = (f64::INFINITY, 0, 0.0);
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let f = (((x - a.x) * dx + (y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let d = (a.x + f * dx - x).hypot(a.y + f * dy - y);
            if d < best.0 {
                best = (d, i, f);
            }
        }
        (best.1, best.2)
    }

    /// Point at arc length `s` (wrapped onto the loop).
    pub fn point_at(&self, s: f64) -> (f64, f64, f64) {
        let total = self.length_m();
        let s = s.rem_euclid(total);
        let i = self.cum.partition_point(|&c| c <= s).saturating_sub(1).min(self.points.len() - 1);
        let n = self.points.len();
        let (a, b) = (self.points[i], self.points[(i + 1) % n]);
        let f = (s - self.cum[i]) / (self.cum[i + 1] - self.cum[i]);
        (a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.z + f * (b.z - a.z))
    }

    /// Elevation at a located position.
    pub fn elevation(&self, idx: usize, frac: f64) -> f64 {
        let n = self.points.len();
        let (a, b) = (self.points[idx % n], self.points[(idx + 1) % n]);
        a.z + frac * (b.z - a.z)
    }

    pub fn start_line(&self) -> StartLine {
        let p = self.points[0];
        let (dir_x, dir_y) = self.tangent(0);
        StartLine { x: p.x, y: p.y, dir_x, dir_y, half_width: GATE_HALF_WIDTH_M }
    }
}

// Signed curvature through three points (positive turning left).
fn menger_curvature(p: Waypoint, q: Waypoint, r: Waypoint) -> f64 {
    let cross = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let a = (q.x - p.x).hypot(q.y - p.y);
    let b = (r.x - q.x).hypot(r.y - q.y);
    let c = (r.x - p.x).hypot(r.y - p.y);
    let denom = a * b * c;
    if denom < 1e-12 {
        0.0
    } else {
        2.0 * cross / denom
    }
}

struct Builder {
    x: f64,
    y: f64,
    heading: f64,
    points: Vec<Waypoint>,
}

impl Builder {
    fn new() -> Self {
        Builder { x: 0.0, y: 0.0, heading: 0.0, points: Vec::new() }
    }

    fn straight(&mut self, len: f64, roughness: f64, z: impl Fn(f64) -> f64) {
        let steps = (len / SPACING_M).round() as usize;
        let (c, s) = (self.heading.cos(), self.heading.sin());
        let (x0, y0) = (self.x, self.y);
        for k in 0..steps {
            let d = k as f64 * len / steps as f64;
            self.points.push(Waypoint { x: x0 + c * d, y: y0 + s * d, z: z(d), roughness });
        }
        self.x = x0 + c * len;
        self.y = y0 + s * len;
    }

    /// `angle` > 0 turns left.
    fn arc(&mut self, radius: f64, angle: f64, roughness: f64) {
        let steps = (radius * angle.abs() / SPACING_M).round() as usize;
        let side = angle.signum();
        // centre of the turn, to the left for positive angles
        let cx = self.x - side * radius * self.heading.sin();
        let cy = self.y + side * radius * self.heading.cos();
        let phi0 = (self.y - cy).atan2(self.x - cx);
        for k in 0..steps {
            let phi = phi0 + angle * k as f64 / steps as f64;
            self.points.push(Waypoint { x: cx + radius * phi.cos(), y: cy + radius * phi.sin(), z: 0.0, roughness });
        }
        let phi = phi0 + angle;
        self.x = cx + radius * phi.cos();
        self.y = cy + radius * phi.sin();
        self.heading += angle;
    }

    fn finish(self) -> Vec<Waypoint> {
        debug_assert!(self.x.hypot(self.y) < 1e-6, "loop does not close");
        self.points
    }
}
