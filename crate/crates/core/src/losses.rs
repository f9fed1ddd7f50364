//! Forward reference values of the training losses.
//!
//! `gamma` holds the six weights in order: uncertainty, lateral location,
//! vertical location, classification, curve columns, curve row bounds.
//! The frame total is
//!
//! ```text
//! total = point + curve
//! point = g1 * unc + vis + loc
//! curve = ce + fit
//! ```
//!
//! Predictions are matched to ground truths once per frame with the
//! Hungarian solver on [`curve_match_cost`]; every term below reuses that
//! matching.

use alloc::vec::Vec;

use crate::assignment::{hungarian, MatchResult};
use crate::curve::{sample_curve, Curve2D};
use crate::error::{Error, Result};
use crate::gaussian::{paired_segment_gaussians, symmetric_kld, AxisFrame};
use crate::geometry::{CameraModel, Point3, SampleGrid};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub const DEFAULT_GAMMA: [f64; 6] = [0.5, 2.0, 10.0, 3.0, 5.0, 2.0];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LossConfig {
    pub gamma: [f64; 6],
    /// Multiplier on the classification term of unmatched predictions.
    pub background_weight: f64,
    pub frame: AxisFrame,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            background_weight: 1.0,
            frame: AxisFrame::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig("loss weights must be finite and non-negative"));
        }
        if !(self.background_weight >= 0.0 && self.background_weight.is_finite()) {
            return Err(Error::InvalidConfig("background weight must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetLane {
    pub points: Vec<Point3>,
    pub visibility: Vec<bool>,
    pub curve: Curve2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedLane {
    pub points: Vec<Point3>,
    /// Visibility probabilities.
    pub visibility: Vec<f64>,
    /// `confidence` is the predicted lane probability.
    pub curve: Curve2D,
    /// Per-segment `(lambda_w, lambda_h)`, one fewer than `points`.
    pub uncertainties: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetFrame {
    pub lanes: Vec<TargetLane>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionFrame {
    pub lanes: Vec<PredictedLane>,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross-entropy of probability `p` against `label`.
pub fn bce(p: f64, label: bool) -> f64 {
    let p = clamp_prob(p);
    if label {
        -libm::log(p)
    } else {
        -libm::log(1.0 - p)
    }
}

/// Unweighted curve-fitting residuals: summed column error over rows valid
/// on both curves, and summed row-bound error.
fn curve_residuals(gt: &Curve2D, pred: &Curve2D, camera: &CameraModel, grid: &SampleGrid) -> (f64, f64) {
    let g = sample_curve(gt, camera, grid);
    let p = sample_curve(pred, camera, grid);
    let du: f64 = g
        .iter()
        .zip(&p)
        .filter(|(a, b)| a.valid && b.valid)
        .map(|(a, b)| libm::fabs(b.u - a.u))
        .sum();
    let dv = libm::fabs(pred.v_low - gt.v_low) + libm::fabs(pred.v_up - gt.v_up);
    (du, dv)
}

/// Weighted curve-fitting loss of one pair.
pub fn curve_fit_loss(
    gt: &Curve2D,
    pred: &Curve2D,
    camera: &CameraModel,
    grid: &SampleGrid,
    config: &LossConfig,
) -> f64 {
    let (du, dv) = curve_residuals(gt, pred, camera, grid);
    config.gamma[4] * du + config.gamma[5] * dv
}

/// Matching cost, ground truths as rows: classification `g4 (1 - c)` plus
/// the curve-fitting loss.
pub fn curve_match_cost(
    gt: &[Curve2D],
    pred: &[Curve2D],
    camera: &CameraModel,
    grid: &SampleGrid,
    config: &LossConfig,
) -> Vec<Vec<f64>> {
    gt.iter()
        .map(|g| {
            pred.iter()
                .map(|p| config.gamma[3] * (1.0 - p.confidence) + curve_fit_loss(g, p, camera, grid, config))
                .collect()
        })
        .collect()
}

pub fn match_frame(
    gt: &TargetFrame,
    pred: &PredictionFrame,
    camera: &CameraModel,
    grid: &SampleGrid,
    config: &LossConfig,
) -> Result<MatchResult> {
    let g: Vec<Curve2D> = gt.lanes.iter().map(|l| l.curve).collect();
    let p: Vec<Curve2D> = pred.lanes.iter().map(|l| l.curve).collect();
    hungarian(&curve_match_cost(&g, &p, camera, grid, config))
}

fn check_lengths(gt: &TargetLane, pred: &PredictedLane) -> Result<()> {
    let expected = gt.points.len();
    for found in [gt.visibility.len(), pred.points.len(), pred.visibility.len()] {
        if found != expected {
            return Err(Error::AnchorMismatch { expected, found });
        }
    }
    Ok(())
}

/// Weighted L1 location loss over visible ground-truth points of matched
/// lanes.
pub fn loss_loc(gt: &TargetFrame, pred: &PredictionFrame, matching: &MatchResult, config: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    for (k, j) in matching.pairs() {
        let (g, p) = (&gt.lanes[k], &pred.lanes[j]);
        check_lengths(g, p)?;
        for ((a, b), vis) in g.points.iter().zip(&p.points).zip(&g.visibility) {
            if *vis {
                total += config.gamma[1] * libm::fabs(b.x - a.x) + config.gamma[2] * libm::fabs(b.z - a.z);
            }
        }
    }
    Ok(total)
}

/// Mean binary cross-entropy of predicted visibility over every anchor of
/// every matched lane; zero when nothing is matched.
pub fn loss_vis(gt: &TargetFrame, pred: &PredictionFrame, matching: &MatchResult) -> Result<f64> {
    let (mut total, mut count) = (0.0, 0usize);
    for (k, j) in matching.pairs() {
        let (g, p) = (&gt.lanes[k], &pred.lanes[j]);
        check_lengths(g, p)?;
        for (prob, label) in p.visibility.iter().zip(&g.visibility) {
            total += bce(*prob, *label);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Symmetric Gaussian KL summed over segments whose two ground-truth
/// endpoints are visible. Matched predictions without uncertainties
/// contribute nothing.
pub fn loss_unc(gt: &TargetFrame, pred: &PredictionFrame, matching: &MatchResult, config: &LossConfig) -> Result<f64> {
    let mut total = 0.0;
    for (k, j) in matching.pairs() {
        let (g, p) = (&gt.lanes[k], &pred.lanes[j]);
        check_lengths(g, p)?;
        let Some(unc) = &p.uncertainties else { continue };
        let segments = g.points.len().saturating_sub(1);
        if unc.len() != segments {
            return Err(Error::AnchorMismatch {
                expected: segments,
                found: unc.len(),
            });
        }
        for (s, &(lw, lh)) in unc.iter().enumerate() {
            if !(g.visibility[s] && g.visibility[s + 1]) {
                continue;
            }
            let (np, ng) = paired_segment_gaussians(p.points[s], p.points[s + 1], g.points[s], g.points[s + 1], lw, lh)?;
            total += symmetric_kld(&np.with_frame(config.frame), &ng.with_frame(config.frame))?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveLoss {
    /// Weighted classification term.
    pub ce: f64,
    /// Weighted fitting term.
    pub fit: f64,
}

/// Classification over every prediction (unmatched ones against the
/// background label) plus curve fitting on matched pairs.
pub fn loss_curve(
    gt: &[Curve2D],
    pred: &[Curve2D],
    matching: &MatchResult,
    camera: &CameraModel,
    grid: &SampleGrid,
    config: &LossConfig,
) -> CurveLoss {
    let owners = matching.column_owners(pred.len());
    let mut out = CurveLoss::default();
    for (j, p) in pred.iter().enumerate() {
        match owners[j] {
            Some(k) => {
                out.ce += config.gamma[3] * bce(p.confidence, true);
                out.fit += curve_fit_loss(&gt[k], p, camera, grid, config);
            }
            None => out.ce += config.gamma[3] * config.background_weight * bce(p.confidence, false),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LossBreakdown {
    /// Unweighted uncertainty loss; it enters `point` as `g1 * unc`.
    pub unc: f64,
    pub vis: f64,
    pub loc: f64,
    pub ce: f64,
    pub fit: f64,
    pub point: f64,
    pub curve: f64,
    pub total: f64,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub matching: MatchResult,
}

pub fn loss_total(
    gt: &TargetFrame,
    pred: &PredictionFrame,
    camera: &CameraModel,
    grid: &SampleGrid,
    config: &LossConfig,
) -> Result<LossBreakdown> {
    config.validate()?;
    camera.validate()?;
    grid.validate()?;
    let matching = match_frame(gt, pred, camera, grid, config)?;
    let unc = loss_unc(gt, pred, &matching, config)?;
    let vis = loss_vis(gt, pred, &matching)?;
    let loc = loss_loc(gt, pred, &matching, config)?;
    let g: Vec<Curve2D> = gt.lanes.iter().map(|l| l.curve).collect();
    let p: Vec<Curve2D> = pred.lanes.iter().map(|l| l.curve).collect();
    let CurveLoss { ce, fit } = loss_curve(&g, &p, &matching, camera, grid, config);
    let point = config.gamma[0] * unc + vis + loc;
    let curve = ce + fit;
    Ok(LossBreakdown {
        unc,
        vis,
        loc,
        ce,
        fit,
        point,
        curve,
        total: point + curve,
        matching,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn camera() -> CameraModel {
        CameraModel::default()
    }

    fn target(x: f64) -> TargetLane {
        TargetLane {
            points: (0..5).map(|i| Point3::new(x, 5.0 + 10.0 * i as f64, 0.0)).collect(),
            visibility: vec![true; 5],
            curve: Curve2D::vertical(480.0 + 100.0 * x, 0.0, 720.0),
        }
    }

    fn perfect(t: &TargetLane) -> PredictedLane {
        PredictedLane {
            points: t.points.clone(),
            visibility: t.visibility.iter().map(|v| if *v { 1.0 } else { 0.0 }).collect(),
            curve: t.curve,
            uncertainties: Some(vec![(0.1, 0.1); t.points.len() - 1]),
        }
    }

    fn frames(xs: &[f64]) -> (TargetFrame, PredictionFrame) {
        let gt = TargetFrame {
            lanes: xs.iter().map(|x| target(*x)).collect(),
        };
        let pred = PredictionFrame {
            lanes: gt.lanes.iter().map(perfect).collect(),
        };
        (gt, pred)
    }

    #[test]
    fn perfect_prediction_leaves_only_clamp_residue() {
        let (gt, pred) = frames(&[-1.75, 1.75]);
        let b = loss_total(&gt, &pred, &camera(), &SampleGrid::default(), &LossConfig::default()).unwrap();
        assert_eq!((b.loc, b.fit, b.unc), (0.0, 0.0, 0.0));
        assert!(b.total <= 1e-5, "{b:?}");
    }

    #[test]
    fn hand_location_case() {
        let (gt, mut pred) = frames(&[0.0]);
        pred.lanes[0].points[2].x += 0.1;
        pred.lanes[0].points[2].z += 0.05;
        let m = match_frame(&gt, &pred, &camera(), &SampleGrid::default(), &LossConfig::default()).unwrap();
        assert_eq!(loss_loc(&gt, &pred, &m, &LossConfig::default()).unwrap(), 0.7);
    }

    #[test]
    fn invisible_offset_is_ignored() {
        let (mut gt, mut pred) = frames(&[0.0]);
        gt.lanes[0].visibility[2] = false;
        pred.lanes[0].points[2].x += 3.0;
        let m = match_frame(&gt, &pred, &camera(), &SampleGrid::default(), &LossConfig::default()).unwrap();
        assert_eq!(loss_loc(&gt, &pred, &m, &LossConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn anchor_mismatch() {
        let (gt, mut pred) = frames(&[0.0]);
        pred.lanes[0].points.pop();
        let m = MatchResult {
            assignment: vec![Some(0)],
            total_cost: 0.0,
        };
        assert!(matches!(
            loss_loc(&gt, &pred, &m, &LossConfig::default()),
            Err(Error::AnchorMismatch { expected: 5, found: 4 })
        ));
    }

    #[test]
    fn analytic_bce() {
        assert!((bce(0.5, true) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce(0.9, true) - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce(1.0, true) <= 1e-6);
        assert!(bce(0.0, false) <= 1e-6);
        assert!(bce(0.0, true).is_finite());
    }

    #[test]
    fn column_shift_cost() {
        let cfg = LossConfig::default();
        let grid = SampleGrid::default();
        let gt = Curve2D::vertical(400.0, 0.0, 720.0);
        let mut shifted = gt;
        shifted.beta_dprime += 10.0;
        let c = curve_match_cost(&[gt], &[gt, shifted], &camera(), &grid, &cfg);
        assert_eq!(c[0][0], 0.0);
        assert_eq!(c[0][1] - c[0][0], 1000.0);
    }

    #[test]
    fn upper_bound_term() {
        let gt = Curve2D::vertical(400.0, 0.0, 700.0);
        let mut p = gt;
        p.v_up -= 8.0;
        let cfg = LossConfig {
            gamma: [0.0, 0.0, 0.0, 0.0, 0.0, 2.0],
            ..LossConfig::default()
        };
        assert_eq!(curve_fit_loss(&gt, &p, &camera(), &SampleGrid::default(), &cfg), 16.0);
    }

    #[test]
    fn background_prediction_costs_nothing() {
        let mut bg = Curve2D::vertical(100.0, 0.0, 720.0);
        bg.confidence = 0.0;
        let m = MatchResult::empty(0);
        let l = loss_curve(&[], &[bg], &m, &camera(), &SampleGrid::default(), &LossConfig::default());
        assert!(l.ce <= 1e-5 && l.fit == 0.0);
    }

    #[test]
    fn single_segment_matches_standalone_kld() {
        let (gt, mut pred) = frames(&[0.0]);
        for p in &mut pred.lanes[0].points {
            p.x += 0.2;
        }
        let m = match_frame(&gt, &pred, &camera(), &SampleGrid::default(), &LossConfig::default()).unwrap();
        let total = loss_unc(&gt, &pred, &m, &LossConfig::default()).unwrap();
        let g = &gt.lanes[0].points;
        let p = &pred.lanes[0].points;
        let mut expected = 0.0;
        for s in 0..4 {
            let (a, b) = paired_segment_gaussians(p[s], p[s + 1], g[s], g[s + 1], 0.1, 0.1).unwrap();
            expected += symmetric_kld(&a, &b).unwrap();
        }
        assert!(total > 0.0);
        assert_eq!(total, expected);
    }

    #[test]
    fn doubling_the_uncertainty_weight() {
        let (gt, mut pred) = frames(&[0.0, 3.5]);
        pred.lanes[1].points[3].x += 0.3;
        pred.lanes[1].visibility[0] = 0.8;
        let base = LossConfig::default();
        let mut doubled = base.clone();
        doubled.gamma[0] *= 2.0;
        let a = loss_total(&gt, &pred, &camera(), &SampleGrid::default(), &base).unwrap();
        let b = loss_total(&gt, &pred, &camera(), &SampleGrid::default(), &doubled).unwrap();
        assert_eq!(2.0 * base.gamma[0] * a.unc, doubled.gamma[0] * b.unc);
        assert_eq!((a.vis, a.loc, a.ce, a.fit), (b.vis, b.loc, b.ce, b.fit));
    }
}
