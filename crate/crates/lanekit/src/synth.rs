//! Synthetic frames with known ground truth and injected observation noise.
//!
//! Each frame holds `lanes` roughly parallel lanes 3.5 m apart. A frame
//! draws one shared lateral profile `x = c1 y + c2 y^2 + c3 y^3` and one
//! vertical profile `z = g y + h y^2`; lanes differ by their lateral offset
//! and their start and end distance. Predictions copy the ground truth and
//! displace every point along the in-plane normal of the local heading by
//! `N(0, sigma_w(y))` and along z by `N(0, sigma_h(y))`.
//!
//! Image curves are fitted to the projected points of every frame with the
//! camera horizon held fixed, skipping points beyond the image or at the
//! horizon (uphill roads rise above it). A frame where some lane keeps too
//! few points gets no curves.

use lanekit_core::{fit_curves, CameraModel, Curve2D, CurveForm, FitOptions, Lane3D, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{FrameRecord, LaneRecord};

pub const LANE_SPACING: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_w0: f64,
    pub sigma_w_slope: f64,
    pub sigma_h0: f64,
    pub sigma_h_slope: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_w0: 0.0,
            sigma_w_slope: 0.0,
            sigma_h0: 0.0,
            sigma_h_slope: 0.0,
            seed: 42,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let s = [self.sigma_w0, self.sigma_w_slope, self.sigma_h0, self.sigma_h_slope];
        if s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("noise parameters must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn sigma_w(&self, y: f64) -> f64 {
        self.sigma_w0 + self.sigma_w_slope * y
    }

    pub fn sigma_h(&self, y: f64) -> f64 {
        self.sigma_h0 + self.sigma_h_slope * y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub frames: usize,
    pub lanes: usize,
    /// Largest magnitude of the quadratic lateral coefficient, 1/m.
    pub curvature_max: f64,
    /// Largest magnitude of the road grade.
    pub grade_max: f64,
    /// Longitudinal spacing of lane points, meters.
    pub point_spacing: f64,
    pub y_start: [f64; 2],
    pub y_end: [f64; 2],
    pub noise: NoiseModel,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            frames: 100,
            lanes: 4,
            curvature_max: 1e-3,
            grade_max: 0.02,
            point_spacing: 2.0,
            y_start: [3.0, 8.0],
            y_end: [60.0, 100.0],
            noise: NoiseModel::default(),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.frames == 0 || self.lanes == 0 {
            return Err(Error::Config("frames and lanes must be positive".into()));
        }
        let ordered = |r: [f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
        if !(ordered(self.y_start) && ordered(self.y_end) && self.y_start[1] < self.y_end[0]) {
            return Err(Error::Config("need y_start ranges below y_end ranges".into()));
        }
        if !(self.point_spacing > 0.0 && self.curvature_max >= 0.0 && self.grade_max >= 0.0) {
            return Err(Error::Config("spacing must be positive and curvature, grade non-negative".into()));
        }
        Ok(())
    }
}

/// Ground truth and noisy predictions of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFrame {
    pub gt: FrameRecord,
    pub pred: FrameRecord,
    /// Signed lateral displacement of every prediction point, lane by lane.
    pub lateral_noise: Vec<Vec<f64>>,
}

struct Profile {
    c: [f64; 3],
    g: f64,
    h: f64,
}

impl Profile {
    fn x(&self, y: f64) -> f64 {
        y * (self.c[0] + y * (self.c[1] + y * self.c[2]))
    }

    fn dx(&self, y: f64) -> f64 {
        self.c[0] + y * (2.0 * self.c[1] + 3.0 * y * self.c[2])
    }

    fn z(&self, y: f64) -> f64 {
        y * (self.g + y * self.h)
    }
}

/// Curves fitted to the projections of `lanes`, or `None` when a lane has
/// too few points inside the image.
pub fn image_curves(camera: &CameraModel, lanes: &[Lane3D]) -> Option<Vec<Curve2D>> {
    let (h, w) = (camera.image_h as f64, camera.image_w as f64);
    let horizon = camera.horizon_row();
    let pixels: Vec<Vec<(f64, f64)>> = lanes
        .iter()
        .map(|l| {
            l.visible_points()
                .into_iter()
                .filter_map(|p| camera.project(p).ok())
                .filter(|&(u, v)| (0.0..w).contains(&u) && v <= h && v > horizon + 1.0)
                .collect()
        })
        .collect();
    let options = FitOptions {
        form: CurveForm::RoadProjection,
        horizon: Some(horizon),
        ..FitOptions::default()
    };
    fit_curves(&pixels, (camera.image_h, camera.image_w), &options)
        .ok()
        .map(|f| f.curves)
}

fn records(camera: &CameraModel, lanes: &[Lane3D]) -> Vec<LaneRecord> {
    let curves = image_curves(camera, lanes);
    lanes
        .iter()
        .enumerate()
        .map(|(i, l)| LaneRecord {
            curve: curves.as_ref().map(|c| c[i]),
            ..LaneRecord::from_lane(l)
        })
        .collect()
}

pub fn generate(params: &SynthParams) -> Result<Vec<SynthFrame>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.noise.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let camera = CameraModel::default();
    let mut frames = Vec::with_capacity(params.frames);
    for f in 0..params.frames {
        let cm = params.curvature_max;
        let profile = Profile {
            c: [
                rng.random_range(-0.05..=0.05),
                if cm > 0.0 { rng.random_range(-cm..=cm) } else { 0.0 },
                if cm > 0.0 { rng.random_range(-cm..=cm) * 0.01 } else { 0.0 },
            ],
            g: if params.grade_max > 0.0 {
                rng.random_range(-params.grade_max..=params.grade_max)
            } else {
                0.0
            },
            h: if params.grade_max > 0.0 {
                rng.random_range(-params.grade_max..=params.grade_max) * 1e-3
            } else {
                0.0
            },
        };
        let centre = (params.lanes as f64 - 1.0) / 2.0;
        let mut gt_lanes = Vec::with_capacity(params.lanes);
        let mut pred_lanes = Vec::with_capacity(params.lanes);
        let mut lateral = Vec::with_capacity(params.lanes);
        for k in 0..params.lanes {
            let offset = (k as f64 - centre) * LANE_SPACING;
            let y0 = rng.random_range(params.y_start[0]..=params.y_start[1]);
            let y1 = rng.random_range(params.y_end[0]..=params.y_end[1]);
            let n = ((y1 - y0) / params.point_spacing).floor() as usize + 1;
            let ys: Vec<f64> = (0..n).map(|i| y0 + i as f64 * params.point_spacing).collect();
            let truth: Vec<Point3> = ys.iter().map(|&y| Point3::new(offset + profile.x(y), y, profile.z(y))).collect();
            let mut noisy = Vec::with_capacity(n);
            let mut shifts = Vec::with_capacity(n);
            for (p, &y) in truth.iter().zip(&ys) {
                let ew = params.noise.sigma_w(y) * std_normal.sample(&mut rng);
                let eh = params.noise.sigma_h(y) * std_normal.sample(&mut rng);
                // in-plane unit normal of the heading (x'(y), 1)
                let slope = profile.dx(y);
                let norm = (1.0 + slope * slope).sqrt();
                let (nx, ny) = (1.0 / norm, -slope / norm);
                noisy.push(Point3::new(p.x + ew * nx, p.y + ew * ny, p.z + eh));
                shifts.push(ew);
            }
            let truth = Lane3D::from_points(truth)?;
            let noisy = Lane3D::from_points(noisy)?.with_score(1.0)?;
            gt_lanes.push(truth);
            pred_lanes.push(noisy);
            lateral.push(shifts);
        }
        let gt = records(&camera, &gt_lanes);
        let pred = records(&camera, &pred_lanes);
        let id = format!("{f:06}");
        frames.push(SynthFrame {
            gt: FrameRecord::new(id.clone(), camera, gt),
            pred: FrameRecord::new(id, camera, pred),
            lateral_noise: lateral,
        });
    }
    Ok(frames)
}
