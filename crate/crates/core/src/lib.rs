//! Lane geometry, segment Gaussians, reference losses and evaluation kernels
//! for monocular 3D lane detection.
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. File formats,
//! synthetic data and the command-line front end live in the `lanekit` crate.
//!
//! Module map:
//!
//! * [`geometry`] - ground-frame lanes, the pinhole camera and dense lane
//!   interpolation.
//! * [`curve`] / [`fit`] - the front-view curve model, row sampling and the
//!   shared-curvature least-squares fit.
//! * [`gaussian`] - segment parameterisation, rotation/covariance and the
//!   closed-form Gaussian KL divergence.
//! * [`assignment`] - the Hungarian solver.
//! * [`losses`] - forward reference values of every training loss term.
//! * [`chamfer`], [`bev`], [`metrics`], [`pointwise`] - evaluation protocols.
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assignment;
pub mod bev;
pub mod chamfer;
pub mod curve;
mod error;
pub mod fit;
pub mod gaussian;
pub mod geometry;
mod linalg;
pub mod losses;
pub mod metrics;
pub mod pointwise;
pub mod sum;

pub use assignment::{hungarian, MatchResult};
pub use curve::{curve_eval, sample_curve, Curve2D, CurveForm, CurveSample};
pub use error::{Error, Result};
pub use fit::{fit_curves, CurveFit, FitOptions};
pub use gaussian::{kld, symmetric_kld, AxisFrame, SegmentGaussian};
pub use geometry::{interpolate_lane, CameraModel, Lane3D, Point3, SampleGrid};
pub use metrics::{EvalConfig, EvalFrame, EvalSettings, MetricReport, Protocol};
pub use pointwise::PointwiseConfig;
