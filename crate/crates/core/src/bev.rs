//! Bird's-eye-view rasterisation of stroked lanes and their IoU.
//!
//! Cells live on a global lattice of `resolution`-meter squares anchored at
//! the ground origin, so masks rasterised independently can be intersected
//! directly. A cell belongs to a lane when its centre lies within half the
//! lane width of the lane's visible polyline, measured in the x-y plane.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{Lane3D, Point3};

/// Sorted, de-duplicated set of occupied cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BevMask {
    cells: Vec<(i64, i64)>,
}

impl BevMask {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[(i64, i64)] {
        &self.cells
    }

    pub fn intersection_len(&self, other: &BevMask) -> usize {
        let (a, b) = (&self.cells, &other.cells);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                core::cmp::Ordering::Less => i += 1,
                core::cmp::Ordering::Greater => j += 1,
                core::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Intersection over union; zero when both masks are empty.
    pub fn iou(&self, other: &BevMask) -> f64 {
        let inter = self.intersection_len(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Rasterises the visible polyline of `lane` as a stroke `lane_width` wide.
pub fn rasterize(lane: &Lane3D, lane_width: f64, resolution: f64) -> Result<BevMask> {
    if !(lane_width > 0.0 && resolution > 0.0) {
        return Err(Error::InvalidConfig("lane width and BEV resolution must be positive"));
    }
    let pts = lane.visible_points();
    if pts.len() < 2 {
        return Err(Error::DegenerateLane { visible: pts.len() });
    }
    let half = lane_width / 2.0;
    let half_sq = half * half;
    let mut cells = Vec::new();
    for w in pts.windows(2) {
        stroke_segment(w[0], w[1], half, half_sq, resolution, &mut cells);
    }
    cells.sort_unstable();
    cells.dedup();
    Ok(BevMask { cells })
}

fn stroke_segment(
    a: Point3,
    b: Point3,
    half: f64,
    half_sq: f64,
    res: f64,
    out: &mut Vec<(i64, i64)>,
) {
    let (ax, ay, bx, by) = (a.x, a.y, b.x, b.y);
    let (dx, dy) = (bx - ax, by - ay);
    let len_sq = dx * dx + dy * dy;
    let i0 = libm::floor((ax.min(bx) - half) / res) as i64;
    let i1 = libm::floor((ax.max(bx) + half) / res) as i64;
    let j0 = libm::floor((ay.min(by) - half) / res) as i64;
    let j1 = libm::floor((ay.max(by) + half) / res) as i64;
    for j in j0..=j1 {
        let cy = (j as f64 + 0.5) * res;
        for i in i0..=i1 {
            let cx = (i as f64 + 0.5) * res;
            let t = if len_sq > 0.0 {
                (((cx - ax) * dx + (cy - ay) * dy) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (cx - (ax + t * dx), cy - (ay + t * dy));
            if ex * ex + ey * ey <= half_sq {
                out.push((i, j));
            }
        }
    }
}

/// BEV IoU of two lanes stroked at `lane_width` on a `resolution` grid.
pub fn bev_iou(gt: &Lane3D, pred: &Lane3D, lane_width: f64, resolution: f64) -> Result<f64> {
    let a = rasterize(gt, lane_width, resolution)?;
    let b = rasterize(pred, lane_width, resolution)?;
    Ok(a.iou(&b))
}
