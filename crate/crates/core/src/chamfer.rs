//! Chamfer-style lane distances on densely interpolated lanes.
//!
//! Nearest-neighbour queries run against a y-sorted copy of the target set
//! and stop scanning once the longitudinal gap alone exceeds the best
//! squared distance found. The squared distance of a pair is computed the
//! same way in every path and `sqrt` is monotone, so the pruned minimum is
//! bit-identical to an exhaustive scan.

use alloc::vec::Vec;

use crate::error::Result;
use crate::geometry::{interpolate_lane, Lane3D, Point3};

#[inline]
fn sq_dist(a: Point3, b: Point3) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let dz = b.z - a.z;
    dx * dx + dy * dy + dz * dz
}

/// A point set prepared for nearest-neighbour queries.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Vec<Point3>,
    sorted: Vec<Point3>,
    polyline: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.y.total_cmp(&b.y));
        Self {
            polyline: points.clone(),
            points,
            sorted,
        }
    }

    /// Interpolates `lane` to `n` points; keeps the visible polyline.
    pub fn from_lane(lane: &Lane3D, n: usize) -> Result<Self> {
        let mut cloud = Self::new(interpolate_lane(lane, n)?);
        cloud.polyline = lane.visible_points();
        Ok(cloud)
    }

    /// The polyline the points were drawn from.
    pub fn polyline(&self) -> &[Point3] {
        &self.polyline
    }

    /// Points in their original order.
    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest squared distance from `q` to the set.
    pub fn nearest_sq(&self, q: Point3) -> f64 {
        let s = &self.sorted;
        let start = s.partition_point(|p| p.y < q.y);
        let mut best = f64::INFINITY;
        for &p in &s[start..] {
            let dy = p.y - q.y;
            if dy * dy > best {
                break;
            }
            best = best.min(sq_dist(q, p));
        }
        for &p in s[..start].iter().rev() {
            let dy = p.y - q.y;
            if dy * dy > best {
                break;
            }
            best = best.min(sq_dist(q, p));
        }
        best
    }

    pub fn nearest(&self, q: Point3) -> f64 {
        libm::sqrt(self.nearest_sq(q))
    }
}

/// Mean over `from` (in its own order) of the distance to the nearest point
/// of `to`.
pub fn directed_mean(from: &PointCloud, to: &PointCloud) -> f64 {
    let sum: f64 = from.points.iter().map(|&p| to.nearest(p)).sum();
    sum / from.len() as f64
}

/// Largest nearest-neighbour distance from `from` to `to`.
pub fn directed_max(from: &PointCloud, to: &PointCloud) -> f64 {
    from.points
        .iter()
        .map(|&p| to.nearest(p))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedDistances {
    pub pred_to_gt: f64,
    pub gt_to_pred: f64,
}

impl DirectedDistances {
    pub fn between(gt: &PointCloud, pred: &PointCloud) -> Self {
        Self {
            pred_to_gt: directed_mean(pred, gt),
            gt_to_pred: directed_mean(gt, pred),
        }
    }

    /// `(d_pred→gt + d_gt→pred) / 2`.
    pub fn bidirectional(&self) -> f64 {
        (self.pred_to_gt + self.gt_to_pred) / 2.0
    }
}

pub fn directed_distances(gt: &Lane3D, pred: &Lane3D, n: usize) -> Result<DirectedDistances> {
    let g = PointCloud::from_lane(gt, n)?;
    let p = PointCloud::from_lane(pred, n)?;
    Ok(DirectedDistances::between(&g, &p))
}

pub fn bidirectional_cd(gt: &Lane3D, pred: &Lane3D, n: usize) -> Result<f64> {
    Ok(directed_distances(gt, pred, n)?.bidirectional())
}

/// Symmetric Hausdorff distance between two point sets.
pub fn max_bidirectional(a: &PointCloud, b: &PointCloud) -> f64 {
    directed_max(a, b).max(directed_max(b, a))
}

/// Squared distance from `q` to segment `a b`.
#[inline]
fn segment_sq_dist(q: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    let t = if len_sq > 0.0 {
        ((q - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    sq_dist(q, a + ab * t)
}

/// Distance from `q` to the polyline through `points`.
pub fn polyline_distance(q: Point3, points: &[Point3]) -> f64 {
    if points.len() == 1 {
        return q.distance(points[0]);
    }
    let mut best = f64::INFINITY;
    for w in points.windows(2) {
        let (lo, hi) = if w[0].y <= w[1].y { (w[0].y, w[1].y) } else { (w[1].y, w[0].y) };
        let gap = if q.y < lo {
            lo - q.y
        } else if q.y > hi {
            q.y - hi
        } else {
            0.0
        };
        if gap * gap > best {
            continue;
        }
        best = best.min(segment_sq_dist(q, w[0], w[1]));
    }
    libm::sqrt(best)
}

/// One-sided Chamfer distance of the unilateral protocol: the mean over the
/// `n` interpolated ground-truth points of the distance to the prediction,
/// taken as its visible polyline together with its `n` interpolated samples.
/// Prediction geometry beyond the ground truth never enters the value.
pub fn unilateral_cd(gt: &Lane3D, pred: &Lane3D, n: usize) -> Result<f64> {
    let g = interpolate_lane(gt, n)?;
    let samples = PointCloud::from_lane(pred, n)?;
    let sum: f64 = g
        .iter()
        .map(|&q| polyline_distance(q, samples.polyline()).min(samples.nearest(q)))
        .sum();
    Ok(sum / g.len() as f64)
}

/// Mean distance from `gt` points to the polyline through `pred`.
pub fn unilateral_from_points(gt: &[Point3], pred: &[Point3]) -> f64 {
    let sum: f64 = gt.iter().map(|&q| polyline_distance(q, pred)).sum();
    sum / gt.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(x: f64, y0: f64, y1: f64) -> Lane3D {
        Lane3D::from_points(vec![Point3::new(x, y0, 0.0), Point3::new(x, y1, 0.0)]).unwrap()
    }

    #[test]
    fn identical_lanes_are_at_zero() {
        let a = line(0.0, 0.0, 30.0);
        assert_eq!(unilateral_cd(&a, &a, 100).unwrap(), 0.0);
        assert_eq!(bidirectional_cd(&a, &a, 100).unwrap(), 0.0);
    }

    #[test]
    fn parallel_offset() {
        let (a, b) = (line(0.0, 0.0, 30.0), line(0.2, 0.0, 30.0));
        assert!((unilateral_cd(&a, &b, 100).unwrap() - 0.2).abs() < 1e-12);
        assert!((bidirectional_cd(&a, &b, 100).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn spurious_extension_is_invisible_to_the_unilateral_distance() {
        let gt = line(0.0, 0.0, 30.0);
        let extended = line(0.0, 0.0, 50.0);
        assert!(unilateral_cd(&gt, &extended, 100).unwrap() < 1e-12);
        let d = bidirectional_cd(&gt, &extended, 100).unwrap();
        assert!(d > 1.0, "{d}");
    }

    #[test]
    fn hausdorff_of_single_displaced_point() {
        let g: Vec<Point3> = (0..100).map(|i| Point3::new(0.0, i as f64 * 0.3, 0.0)).collect();
        let mut p = g.clone();
        p[99].x += 1.0;
        let d = max_bidirectional(&PointCloud::new(g), &PointCloud::new(p));
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polyline_distance_to_interior() {
        let pts = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, 10.0, 0.0)];
        assert_eq!(polyline_distance(Point3::new(3.0, 5.0, 4.0), &pts), 5.0);
        assert_eq!(polyline_distance(Point3::new(0.0, 13.0, 0.0), &pts), 3.0);
    }
}
