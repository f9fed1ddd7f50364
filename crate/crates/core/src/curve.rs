//! The front-view lane curve `u = f(v)` and its row sampling.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, SampleGrid};

/// Guard on `|v - rho[1]|` for the road-projection form, pixels.
pub const EPS_DEN: f64 = 1e-6;

/// Column written into invalid samples.
pub const INVALID_U: f64 = -1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CurveForm {
    /// `u = r1/(v-r2)^2 + r3/(v-r2) + r4 + b'v + b''`, with `r2` the
    /// horizon row.
    #[default]
    RoadProjection,
    /// `u = r1 + r2 v + r3 v^2 + r4 v^3 + b'v + b''`.
    Poly3,
}

/// A lane curve in the image. `rho` is shared by every lane of a frame,
/// the biases and row bounds belong to the lane.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Curve2D {
    #[cfg_attr(feature = "serde", serde(default))]
    pub form: CurveForm,
    pub rho: [f64; 4],
    pub beta_prime: f64,
    pub beta_dprime: f64,
    pub v_low: f64,
    pub v_up: f64,
    pub confidence: f64,
}

impl Curve2D {
    /// A constant-column curve `u = column` over `[v_low, v_up]`.
    pub fn vertical(column: f64, v_low: f64, v_up: f64) -> Self {
        Self {
            form: CurveForm::Poly3,
            rho: [0.0; 4],
            beta_prime: 0.0,
            beta_dprime: column,
            v_low,
            v_up,
            confidence: 1.0,
        }
    }

    pub fn validate(&self, image_h: u32) -> Result<()> {
        let finite = self.rho.iter().all(|r| r.is_finite())
            && self.beta_prime.is_finite()
            && self.beta_dprime.is_finite();
        if !finite {
            return Err(Error::InvalidCurve("non-finite coefficient"));
        }
        if !(0.0 <= self.v_low && self.v_low < self.v_up && self.v_up <= image_h as f64) {
            return Err(Error::InvalidCurve("need 0 <= v_low < v_up <= image height"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidCurve("confidence outside [0, 1]"));
        }
        Ok(())
    }
}

pub fn curve_eval(curve: &Curve2D, v: f64) -> Result<f64> {
    let [r1, r2, r3, r4] = curve.rho;
    let shared = match curve.form {
        CurveForm::RoadProjection => {
            let d = v - r2;
            if libm::fabs(d) < EPS_DEN {
                return Err(Error::SingularRow { v });
            }
            r1 / (d * d) + r3 / d + r4
        }
        CurveForm::Poly3 => r1 + v * (r2 + v * (r3 + v * r4)),
    };
    Ok(shared + curve.beta_prime * v + curve.beta_dprime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
}

/// Samples `curve` on the grid rows of `camera`'s image.
pub fn sample_curve(curve: &Curve2D, camera: &CameraModel, grid: &SampleGrid) -> Vec<CurveSample> {
    sample_rows(curve, grid.rows(camera.image_h), camera.image_w)
}

/// Samples `curve` at arbitrary rows. A sample is valid iff the row lies in
/// `[v_low, v_up]`, the curve is defined there and `0 <= u < image_w`.
pub fn sample_rows(
    curve: &Curve2D,
    rows: impl IntoIterator<Item = f64>,
    image_w: u32,
) -> Vec<CurveSample> {
    let w = image_w as f64;
    rows.into_iter()
        .map(|v| {
            let in_rows = curve.v_low <= v && v <= curve.v_up;
            match curve_eval(curve, v) {
                Ok(u) if in_rows && u.is_finite() && 0.0 <= u && u < w => {
                    CurveSample { u, v, valid: true }
                }
                _ => CurveSample {
                    u: INVALID_U,
                    v,
                    valid: false,
                },
            }
        })
        .collect()
}
