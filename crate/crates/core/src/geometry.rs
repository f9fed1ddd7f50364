//! Ground-frame lanes, the front-view camera and dense lane interpolation.
//!
//! Frames follow the usual driving conventions. The ground frame has its
//! origin under the optical centre with x right, y forward and z up. The
//! camera frame has x right, y down and z forward. All lengths are meters,
//! image coordinates are pixels.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn distance(self, other: Self) -> f64 {
        (other - self).norm()
    }

    pub fn midpoint(self, other: Self) -> Self {
        Self::new(
            (self.x + other.x) / 2.0,
            (self.y + other.y) / 2.0,
            (self.z + other.z) / 2.0,
        )
    }

    /// `self + (other - self) * t`.
    pub fn lerp(self, other: Self, t: f64) -> Self {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Self::new(x, y, z)
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// An ordered 3D lane in the ground frame.
///
/// Points run away from the vehicle: y is strictly increasing. Each point
/// carries a visibility flag, and the lane as a whole an optional detection
/// score.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane3D {
    points: Vec<Point3>,
    visibility: Vec<bool>,
    score: Option<f64>,
}

impl Lane3D {
    pub fn new(points: Vec<Point3>, visibility: Vec<bool>, score: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidLane("lane has no points"));
        }
        if visibility.len() != points.len() {
            return Err(Error::InvalidLane("visibility length differs from point count"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidLane("non-finite coordinate"));
        }
        if points.windows(2).any(|w| w[1].y <= w[0].y) {
            return Err(Error::InvalidLane("y must be strictly increasing"));
        }
        if let Some(s) = score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidLane("score outside [0, 1]"));
            }
        }
        Ok(Self {
            points,
            visibility,
            score,
        })
    }

    /// A lane whose points are all visible.
    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        let visibility = alloc::vec![true; points.len()];
        Self::new(points, visibility, None)
    }

    pub fn with_score(mut self, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidLane("score outside [0, 1]"));
        }
        self.score = Some(score);
        Ok(self)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn visibility(&self) -> &[bool] {
        &self.visibility
    }

    pub fn score(&self) -> Option<f64> {
        self.score
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn visible_points(&self) -> Vec<Point3> {
        self.points
            .iter()
            .zip(&self.visibility)
            .filter_map(|(p, &v)| v.then_some(*p))
            .collect()
    }
}

/// Pinhole intrinsics plus a level, roll-free mount at `height` meters
/// above the ground, tilted down by `pitch` radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: f64,
    pub pitch: f64,
    pub image_h: u32,
    pub image_w: u32,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: 1000.0,
            fy: 1000.0,
            cx: 480.0,
            cy: 360.0,
            height: 1.5,
            pitch: 0.0,
            image_h: 720,
            image_w: 960,
        }
    }
}

/// Depth guard for projection, meters.
pub const MIN_DEPTH: f64 = 1e-3;

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy, self.height, self.pitch]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidCamera("non-finite parameter"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidCamera("focal lengths must be positive"));
        }
        if self.height <= 0.0 {
            return Err(Error::InvalidCamera("height must be positive"));
        }
        if !(0.0..core::f64::consts::FRAC_PI_2).contains(&self.pitch) {
            return Err(Error::InvalidCamera("pitch must lie in [0, pi/2)"));
        }
        if self.image_h == 0 || self.image_w == 0 {
            return Err(Error::InvalidCamera("image size must be non-zero"));
        }
        Ok(())
    }

    /// Ground-frame directions of the camera x (right), y (down) and z
    /// (forward) axes.
    fn axes(&self) -> (Point3, Point3, Point3) {
        let (s, c) = libm::sincos(self.pitch);
        (
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, -s, -c),
            Point3::new(0.0, c, -s),
        )
    }

    pub fn ground_to_camera(&self, p: Point3) -> Point3 {
        let (right, down, forward) = self.axes();
        let d = p - Point3::new(0.0, 0.0, self.height);
        Point3::new(d.dot(right), d.dot(down), d.dot(forward))
    }

    /// Projects a ground-frame point to pixel `(u, v)`.
    pub fn project(&self, p: Point3) -> Result<(f64, f64)> {
        let c = self.ground_to_camera(p);
        if c.z <= MIN_DEPTH {
            return Err(Error::BehindCamera { depth: c.z });
        }
        Ok((
            self.cx + self.fx * c.x / c.z,
            self.cy + self.fy * c.y / c.z,
        ))
    }

    /// Intersects the ray through pixel `(u, v)` with the z = 0 plane.
    pub fn unproject_to_ground(&self, u: f64, v: f64) -> Result<Point3> {
        let (right, down, forward) = self.axes();
        let ray_cam = Point3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let ray = right * ray_cam.x + down * ray_cam.y + forward * ray_cam.z;
        // must head downwards to meet the ground ahead of the optical centre
        if !(ray.z < -1e-12) {
            return Err(Error::NoGroundIntersection);
        }
        let t = self.height / -ray.z;
        Ok(Point3::new(ray.x * t, ray.y * t, 0.0))
    }

    /// Image row of the vanishing line of the ground plane.
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.fy * libm::tan(self.pitch)
    }
}

/// Sampling layout shared by curves (rows), points (y anchors) and the
/// Chamfer interpolation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SampleGrid {
    /// Number of uniformly spaced curve sample rows.
    pub j_prime: usize,
    /// Longitudinal anchor coordinates, meters.
    pub y_anchors: Vec<f64>,
    pub n_interp: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        let y_anchors = (0..20).map(|i| 3.0 + 100.0 * i as f64 / 19.0).collect();
        Self {
            j_prime: 20,
            y_anchors,
            n_interp: 100,
        }
    }
}

impl SampleGrid {
    pub fn validate(&self) -> Result<()> {
        if self.j_prime < 2 {
            return Err(Error::InvalidConfig("j_prime must be at least 2"));
        }
        if self.n_interp < 2 {
            return Err(Error::InvalidConfig("n_interp must be at least 2"));
        }
        if self.y_anchors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("y_anchors must be strictly increasing"));
        }
        Ok(())
    }

    /// The `j_prime` sample rows, uniformly spaced over `[0, image_h)`.
    pub fn rows(&self, image_h: u32) -> impl Iterator<Item = f64> + '_ {
        let h = image_h as f64;
        let n = self.j_prime;
        (0..n).map(move |j| h * j as f64 / n as f64)
    }
}

/// Resamples the visible polyline of `lane` to `n` points spaced uniformly
/// in arc length. Both endpoints are reproduced exactly and no point lies
/// outside the original polyline.
pub fn interpolate_lane(lane: &Lane3D, n: usize) -> Result<Vec<Point3>> {
    resample_polyline(&lane.visible_points(), n)
}

pub fn resample_polyline(points: &[Point3], n: usize) -> Result<Vec<Point3>> {
    if n < 2 {
        return Err(Error::InvalidConfig("interpolation size must be at least 2"));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateLane {
            visible: points.len(),
        });
    }
    let cumulative = arc_lengths(points);
    let total = cumulative[cumulative.len() - 1];

    let mut out = Vec::with_capacity(n);
    out.push(points[0]);
    let mut seg = 0;
    let last_seg = points.len() - 2;
    for i in 1..n - 1 {
        let s = total * i as f64 / (n - 1) as f64;
        while seg < last_seg && cumulative[seg + 1] < s {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 {
            ((s - cumulative[seg]) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg].lerp(points[seg + 1], t));
    }
    out.push(points[points.len() - 1]);
    Ok(out)
}

/// Running arc length at each vertex, starting at 0.
pub fn arc_lengths(points: &[Point3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in points.windows(2) {
        acc += w[0].distance(w[1]);
        out.push(acc);
    }
    out
}
