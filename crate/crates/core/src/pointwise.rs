//! Pointwise protocol on a shared grid of longitudinal anchors.
//!
//! Lanes are resampled at fixed y anchors and compared in the x-z plane.
//! Predictions are assigned one-to-one to ground truths at minimum summed
//! cost; a matched prediction is a true positive when enough of the
//! ground-truth visible anchors lie within `tau_dist`.

use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::{hungarian, MatchResult};
use crate::error::{Error, Result};
use crate::geometry::Lane3D;
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PointwiseConfig {
    /// Per-anchor distance threshold, meters (closed: `<=` counts).
    pub tau_dist: f64,
    /// Required fraction of in-threshold visible anchors.
    pub tp_fraction: f64,
    /// Near range `[lo, hi)`, meters.
    pub near_range: [f64; 2],
    /// Far range `[lo, hi]`, meters.
    pub far_range: [f64; 2],
    /// Per-anchor matching cost cap as a multiple of `tau_dist`.
    pub cap_factor: f64,
    pub y_anchors: Vec<f64>,
}

impl Default for PointwiseConfig {
    fn default() -> Self {
        Self {
            tau_dist: 1.5,
            tp_fraction: 0.75,
            near_range: [0.0, 40.0],
            far_range: [40.0, 100.0],
            cap_factor: 1.5,
            y_anchors: (0..=100).map(f64::from).collect(),
        }
    }
}

/// The customary threshold sweep for this protocol.
pub const DEFAULT_TAU_SWEEP: [f64; 3] = [0.1, 0.5, 1.5];

impl PointwiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_dist > 0.0) {
            return Err(Error::InvalidConfig("tau_dist must be positive"));
        }
        if !(self.tp_fraction > 0.0 && self.tp_fraction <= 1.0) {
            return Err(Error::InvalidConfig("tp_fraction must lie in (0, 1]"));
        }
        let [nl, nh] = self.near_range;
        let [fl, fh] = self.far_range;
        if !(nl < nh && nh <= fl && fl < fh) {
            return Err(Error::InvalidConfig("near/far ranges must be increasing and disjoint"));
        }
        if !(self.cap_factor > 0.0) {
            return Err(Error::InvalidConfig("cap_factor must be positive"));
        }
        if self.y_anchors.is_empty() || self.y_anchors.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("y_anchors must be non-empty and strictly increasing"));
        }
        Ok(())
    }

    fn cap(&self) -> f64 {
        self.cap_factor * self.tau_dist
    }
}

/// A lane sampled at the anchor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredLane {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub visible: Vec<bool>,
}

impl AnchoredLane {
    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }
}

/// Linear interpolation of the visible polyline at each anchor. Anchors
/// outside the visible y extent are marked invisible.
pub fn resample_to_anchors(lane: &Lane3D, anchors: &[f64]) -> AnchoredLane {
    let pts = lane.visible_points();
    let mut out = AnchoredLane {
        x: vec![0.0; anchors.len()],
        z: vec![0.0; anchors.len()],
        visible: vec![false; anchors.len()],
    };
    if pts.is_empty() {
        return out;
    }
    let (first, last) = (pts[0].y, pts[pts.len() - 1].y);
    for (k, &y) in anchors.iter().enumerate() {
        if y < first || y > last {
            continue;
        }
        // first vertex with y >= anchor
        let i = pts.partition_point(|p| p.y < y);
        let (x, z) = if pts[i].y == y || i == 0 {
            (pts[i].x, pts[i].z)
        } else {
            let (a, b) = (pts[i - 1], pts[i]);
            let t = (y - a.y) / (b.y - a.y);
            (a.x + t * (b.x - a.x), a.z + t * (b.z - a.z))
        };
        out.x[k] = x;
        out.z[k] = z;
        out.visible[k] = true;
    }
    out
}

fn check_anchors(lane: &AnchoredLane, config: &PointwiseConfig) -> Result<()> {
    let expected = config.y_anchors.len();
    if lane.len() != expected || lane.x.len() != expected || lane.z.len() != expected {
        return Err(Error::AnchorMismatch {
            expected,
            found: lane.len(),
        });
    }
    Ok(())
}

#[inline]
fn xz_distance(gt: &AnchoredLane, pred: &AnchoredLane, k: usize) -> f64 {
    let dx = pred.x[k] - gt.x[k];
    let dz = pred.z[k] - gt.z[k];
    libm::sqrt(dx * dx + dz * dz)
}

/// Mean capped x-z distance over the ground-truth visible anchors. Anchors
/// the prediction does not cover cost the cap.
pub fn pair_cost(gt: &AnchoredLane, pred: &AnchoredLane, config: &PointwiseConfig) -> Result<f64> {
    check_anchors(gt, config)?;
    check_anchors(pred, config)?;
    let cap = config.cap();
    let mut sum = 0.0;
    let mut n = 0usize;
    for k in 0..gt.len() {
        if !gt.visible[k] {
            continue;
        }
        n += 1;
        sum += if pred.visible[k] {
            xz_distance(gt, pred, k).min(cap)
        } else {
            cap
        };
    }
    Ok(if n == 0 { cap } else { sum / n as f64 })
}

pub fn pointwise_match(
    gt: &[AnchoredLane],
    pred: &[AnchoredLane],
    config: &PointwiseConfig,
) -> Result<MatchResult> {
    if pred.is_empty() {
        for g in gt {
            check_anchors(g, config)?;
        }
        return Ok(MatchResult::empty(gt.len()));
    }
    let cost = gt
        .iter()
        .map(|g| pred.iter().map(|p| pair_cost(g, p, config)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    hungarian(&cost)
}

/// True when at least `tp_fraction` of the ground-truth visible anchors are
/// covered by the prediction within `tau_dist`.
pub fn pointwise_tp(gt: &AnchoredLane, pred: &AnchoredLane, config: &PointwiseConfig) -> Result<bool> {
    check_anchors(gt, config)?;
    check_anchors(pred, config)?;
    let mut visible = 0usize;
    let mut within = 0usize;
    for k in 0..gt.len() {
        if !gt.visible[k] {
            continue;
        }
        visible += 1;
        if pred.visible[k] && xz_distance(gt, pred, k) <= config.tau_dist {
            within += 1;
        }
    }
    Ok(visible > 0 && within as f64 >= config.tp_fraction * visible as f64)
}

/// Mean absolute lateral and vertical errors per range. A range without
/// samples reports `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct XzErrors {
    pub x_near: Option<f64>,
    pub x_far: Option<f64>,
    pub z_near: Option<f64>,
    pub z_far: Option<f64>,
}

/// Running sums behind [`XzErrors`]; additive across pairs and frames.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct XzAccumulator {
    pub x_near: CompensatedSum,
    pub z_near: CompensatedSum,
    pub x_far: CompensatedSum,
    pub z_far: CompensatedSum,
}

impl XzAccumulator {
    /// Adds the anchors visible in both lanes.
    pub fn add_pair(&mut self, gt: &AnchoredLane, pred: &AnchoredLane, config: &PointwiseConfig) -> Result<()> {
        check_anchors(gt, config)?;
        check_anchors(pred, config)?;
        let [nl, nh] = config.near_range;
        let [fl, fh] = config.far_range;
        for (k, &y) in config.y_anchors.iter().enumerate() {
            if !(gt.visible[k] && pred.visible[k]) {
                continue;
            }
            let ex = libm::fabs(pred.x[k] - gt.x[k]);
            let ez = libm::fabs(pred.z[k] - gt.z[k]);
            if nl <= y && y < nh {
                self.x_near.add(ex);
                self.z_near.add(ez);
            } else if fl <= y && y <= fh {
                self.x_far.add(ex);
                self.z_far.add(ez);
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &XzAccumulator) {
        self.x_near.merge(&other.x_near);
        self.z_near.merge(&other.z_near);
        self.x_far.merge(&other.x_far);
        self.z_far.merge(&other.z_far);
    }

    pub fn errors(&self) -> XzErrors {
        XzErrors {
            x_near: self.x_near.mean(),
            x_far: self.x_far.mean(),
            z_near: self.z_near.mean(),
            z_far: self.z_far.mean(),
        }
    }
}

pub fn xz_errors(pairs: &[(&AnchoredLane, &AnchoredLane)], config: &PointwiseConfig) -> Result<XzErrors> {
    let mut acc = XzAccumulator::default();
    for (g, p) in pairs {
        acc.add_pair(g, p, config)?;
    }
    Ok(acc.errors())
}
