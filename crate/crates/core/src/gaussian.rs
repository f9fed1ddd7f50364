//! Lane segments as 3D Gaussians.
//!
//! A segment between two adjacent lane points is centred at their midpoint.
//! Its principal scales are half the segment length and half the lateral and
//! vertical uncertainties; its orientation comes from the segment yaw and
//! pitch with zero roll. The covariance square root is `R Λ Rᵀ`, so the
//! covariance itself is `R Λ² Rᵀ`.

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub type Mat3 = [[f64; 3]; 3];

/// Smallest admissible principal scale, meters.
pub const MIN_SCALE: f64 = 1e-6;
/// Segments shorter than this have no defined orientation, meters.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub mu: Point3,
    pub length: f64,
    pub theta_x: f64,
    pub theta_z: f64,
}

pub fn segment_params(a: Point3, b: Point3) -> Result<SegmentParams> {
    let d = b - a;
    let length = d.norm();
    if !(length >= MIN_SEGMENT_LENGTH) {
        return Err(Error::ZeroLengthSegment);
    }
    let horizontal = libm::sqrt(d.x * d.x + d.y * d.y);
    Ok(SegmentParams {
        mu: a.midpoint(b),
        length,
        theta_x: libm::atan2(d.z, horizontal),
        theta_z: libm::atan2(d.y, d.x),
    })
}

/// The segment rotation: yaw about z after pitch about x, `Rz(θz)·Rx(θx)`.
///
/// The first column is the horizontal heading; pitch turns the lateral and
/// vertical axes about it.
pub fn rotation_matrix(theta_x: f64, theta_z: f64) -> Mat3 {
    let (sx, cx) = libm::sincos(theta_x);
    let (sz, cz) = libm::sincos(theta_z);
    [
        [cz, -sz * cx, sx * sz],
        [sz, cz * cx, -cz * sx],
        [0.0, sx, cx],
    ]
}

/// Alternative frame whose first axis is the full 3D segment direction.
/// Columns: direction, horizontal left normal, their cross product.
pub fn aligned_rotation_matrix(theta_x: f64, theta_z: f64) -> Mat3 {
    let (sx, cx) = libm::sincos(theta_x);
    let (sz, cz) = libm::sincos(theta_z);
    [
        [cx * cz, -sz, -sx * cz],
        [cx * sz, cz, -sx * sz],
        [sx, 0.0, cx],
    ]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AxisFrame {
    /// [`rotation_matrix`].
    #[default]
    HeadingPitch,
    /// [`aligned_rotation_matrix`].
    DirectionAligned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentGaussian {
    pub mu: Point3,
    pub lambda_l: f64,
    pub lambda_w: f64,
    pub lambda_h: f64,
    pub theta_x: f64,
    pub theta_z: f64,
    pub frame: AxisFrame,
}

impl SegmentGaussian {
    /// Builds the Gaussian of segment `a -> b` with the given uncertainties.
    pub fn from_segment(a: Point3, b: Point3, lambda_w: f64, lambda_h: f64) -> Result<Self> {
        let p = segment_params(a, b)?;
        Ok(Self {
            mu: p.mu,
            lambda_l: p.length,
            lambda_w,
            lambda_h,
            theta_x: p.theta_x,
            theta_z: p.theta_z,
            frame: AxisFrame::default(),
        })
    }

    pub fn with_frame(mut self, frame: AxisFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for value in [self.lambda_l, self.lambda_w, self.lambda_h] {
            if !(value >= MIN_SCALE) || !value.is_finite() {
                return Err(Error::NumericallySingular { value });
            }
        }
        if !(self.mu.is_finite() && self.theta_x.is_finite() && self.theta_z.is_finite()) {
            return Err(Error::InvalidConfig("non-finite gaussian parameter"));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        match self.frame {
            AxisFrame::HeadingPitch => rotation_matrix(self.theta_x, self.theta_z),
            AxisFrame::DirectionAligned => aligned_rotation_matrix(self.theta_x, self.theta_z),
        }
    }

    /// Eigenvalues of the covariance in axis order (length, lateral, vertical).
    pub fn variances(&self) -> [f64; 3] {
        let half = |l: f64| (l / 2.0) * (l / 2.0);
        [half(self.lambda_l), half(self.lambda_w), half(self.lambda_h)]
    }

    /// `R Λ² Rᵀ`.
    pub fn covariance(&self) -> Mat3 {
        conjugate_diagonal(&self.rotation(), self.variances())
    }

    /// `R Λ⁻² Rᵀ`, assembled from the factors rather than by inversion.
    pub fn precision(&self) -> Mat3 {
        let s = self.variances();
        conjugate_diagonal(&self.rotation(), [1.0 / s[0], 1.0 / s[1], 1.0 / s[2]])
    }
}

fn conjugate_diagonal(r: &Mat3, d: [f64; 3]) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| r[i][k] * d[k] * r[j][k]).sum();
        }
    }
    out
}

/// Closed-form `KL(a || b)` between two segment Gaussians.
pub fn kld(a: &SegmentGaussian, b: &SegmentGaussian) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let (ra, rb) = (a.rotation(), b.rotation());
    let (sa, sb) = (a.variances(), b.variances());

    // tr(Σb⁻¹ Σa) with M = Rbᵀ Ra
    let mut trace = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let m: f64 = (0..3).map(|k| rb[k][i] * ra[k][j]).sum();
            trace += m * m * sa[j] / sb[i];
        }
    }

    let d = a.mu - b.mu;
    let mut mahalanobis = 0.0;
    for i in 0..3 {
        let e = rb[0][i] * d.x + rb[1][i] * d.y + rb[2][i] * d.z;
        mahalanobis += e * e / sb[i];
    }

    let log_det_ratio: f64 = (0..3).map(|i| libm::log(sb[i]) - libm::log(sa[i])).sum();
    Ok((0.5 * (trace + mahalanobis - 3.0 + log_det_ratio)).max(0.0))
}

/// `½ (KL(a‖b) + KL(b‖a))`.
pub fn symmetric_kld(a: &SegmentGaussian, b: &SegmentGaussian) -> Result<f64> {
    Ok(0.5 * (kld(a, b)? + kld(b, a)?))
}

/// Gaussians for a predicted segment and its ground-truth counterpart. Both
/// carry the predicted uncertainties; only their geometry differs.
pub fn paired_segment_gaussians(
    pred_a: Point3,
    pred_b: Point3,
    gt_a: Point3,
    gt_b: Point3,
    lambda_w_hat: f64,
    lambda_h_hat: f64,
) -> Result<(SegmentGaussian, SegmentGaussian)> {
    let pred = SegmentGaussian::from_segment(pred_a, pred_b, lambda_w_hat, lambda_h_hat)?;
    let gt = SegmentGaussian::from_segment(gt_a, gt_b, lambda_w_hat, lambda_h_hat)?;
    pred.validate()?;
    gt.validate()?;
    Ok((pred, gt))
}
