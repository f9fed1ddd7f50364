//! Frame-level evaluation and dataset aggregation for the four protocols.
//!
//! * `Once` - lanes are matched one-to-one on BEV IoU; a matched prediction
//!   is a true positive when its IoU exceeds `tau_iou` and its unilateral
//!   Chamfer distance is below `tau_cd`. The error statistic (CDE) is the
//!   mean unilateral distance over true positives.
//! * `Bcd` - every prediction, in input order, claims its nearest ground
//!   truth by bidirectional Chamfer distance; it is a true positive if that
//!   distance is within `tau_bcd` and the ground truth is still unclaimed.
//! * `Mbd` - IoU matching as in `Once`; the statistic is the worst-case
//!   (Hausdorff) distance of each matched pair, aggregated over pairs.
//! * `OpenLane` - see [`crate::pointwise`].
//!
//! Frames are independent. [`evaluate_frame`] produces a [`FrameOutcome`]
//! and [`aggregate`] reduces outcomes in order, so callers may evaluate
//! frames in parallel and still obtain identical reports.

use alloc::vec;
use alloc::vec::Vec;

use crate::assignment::hungarian;
use crate::bev::{rasterize, BevMask};
use crate::chamfer::{directed_max, max_bidirectional, unilateral_cd, DirectedDistances, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Lane3D;
use crate::pointwise::{
    pointwise_match, pointwise_tp, resample_to_anchors, PointwiseConfig, XzAccumulator, XzErrors,
};
use crate::sum::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Protocol {
    Once,
    Bcd,
    Mbd,
    OpenLane,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Once, Protocol::Bcd, Protocol::Mbd, Protocol::OpenLane];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Once => "once",
            Protocol::Bcd => "bcd",
            Protocol::Mbd => "mbd",
            Protocol::OpenLane => "openlane",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// How pair-level worst-case distances become the dataset MBD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MbdAggregation {
    /// Symmetric Hausdorff per pair, averaged over pairs.
    #[default]
    PairMaxMean,
    /// Largest symmetric Hausdorff over all pairs.
    DatasetMax,
    /// Per pair the mean of the two directed maxima, averaged over pairs.
    MeanDirectedMax,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    pub tau_cd: f64,
    pub tau_iou: f64,
    pub tau_bcd: f64,
    pub lane_width: f64,
    pub bev_resolution: f64,
    pub n_interp: usize,
    pub mbd_aggregation: MbdAggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tau_cd: 0.3,
            tau_iou: 0.3,
            tau_bcd: 0.3,
            lane_width: 0.3,
            bev_resolution: 0.05,
            n_interp: 100,
            mbd_aggregation: MbdAggregation::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tau_cd, self.tau_iou, self.tau_bcd, self.lane_width, self.bev_resolution];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("thresholds, lane width and resolution must be positive"));
        }
        if self.n_interp < 2 {
            return Err(Error::InvalidConfig("n_interp must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalSettings {
    pub eval: EvalConfig,
    pub pointwise: PointwiseConfig,
}

impl EvalSettings {
    pub fn validate(&self) -> Result<()> {
        self.eval.validate()?;
        self.pointwise.validate()
    }

    /// The distance threshold a sweep varies for `protocol`.
    pub fn threshold(&self, protocol: Protocol) -> f64 {
        match protocol {
            Protocol::Once | Protocol::Mbd => self.eval.tau_cd,
            Protocol::Bcd => self.eval.tau_bcd,
            Protocol::OpenLane => self.pointwise.tau_dist,
        }
    }

    pub fn with_threshold(&self, protocol: Protocol, tau: f64) -> Self {
        let mut s = self.clone();
        match protocol {
            Protocol::Once | Protocol::Mbd => s.eval.tau_cd = tau,
            Protocol::Bcd => s.eval.tau_bcd = tau,
            Protocol::OpenLane => s.pointwise.tau_dist = tau,
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalFrame {
    pub gt: Vec<Lane3D>,
    pub pred: Vec<Lane3D>,
}

/// Error contribution of one matched ground-truth / prediction pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairError {
    pub gt: usize,
    pub pred: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FrameOutcome {
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    pub pairs: Vec<PairError>,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub xz: XzAccumulator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ErrorStat {
    /// Mean unilateral Chamfer distance over true positives, meters.
    Cde { value: Option<f64> },
    /// Mean bidirectional Chamfer distance over true positives, meters.
    MeanBcd { value: Option<f64> },
    Mbd {
        value: Option<f64>,
        aggregation: MbdAggregation,
    },
    Xz { errors: XzErrors },
}

impl ErrorStat {
    /// The scalar statistic, where the protocol has one.
    pub fn value(&self) -> Option<f64> {
        match self {
            ErrorStat::Cde { value } | ErrorStat::MeanBcd { value } | ErrorStat::Mbd { value, .. } => *value,
            ErrorStat::Xz { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MetricReport {
    pub protocol: Protocol,
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub error: ErrorStat,
    pub per_frame: Vec<FrameOutcome>,
}

/// Precision, recall and F1, each zero when undefined.
pub fn precision_recall_f1(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

/// Per-prediction flags of the bidirectional selection.
#[derive(Debug, Clone, PartialEq)]
pub struct BcdSelection {
    pub tp: Vec<bool>,
    pub fp: Vec<bool>,
    pub covered: Vec<bool>,
    /// For each prediction, its nearest ground truth and that distance.
    pub nearest: Vec<Option<(usize, f64)>>,
}

/// Bidirectional-distance matrix `d[i][j]` between ground truth `i` and
/// prediction `j`.
pub fn bcd_matrix(gt: &[Lane3D], pred: &[Lane3D], n: usize) -> Result<Vec<Vec<f64>>> {
    let g = clouds(gt, n)?;
    let p = clouds(pred, n)?;
    Ok(g.iter()
        .map(|gi| p.iter().map(|pj| DirectedDistances::between(gi, pj).bidirectional()).collect())
        .collect())
}

fn clouds(lanes: &[Lane3D], n: usize) -> Result<Vec<PointCloud>> {
    lanes.iter().map(|l| PointCloud::from_lane(l, n)).collect()
}

/// Greedy true/false-positive selection on bidirectional Chamfer distance.
///
/// Predictions are visited in input order. Each takes the ground truth at
/// minimum distance (lowest index on ties); it is a true positive when that
/// distance is at most `tau_bcd` and the ground truth is not yet covered.
pub fn bcd_select_tp_fp(gt: &[Lane3D], pred: &[Lane3D], config: &EvalConfig) -> Result<BcdSelection> {
    let d = bcd_matrix(gt, pred, config.n_interp)?;
    Ok(select_from_matrix(&d, gt.len(), pred.len(), config.tau_bcd))
}

pub fn select_from_matrix(d: &[Vec<f64>], n_gt: usize, n_pred: usize, tau: f64) -> BcdSelection {
    let mut sel = BcdSelection {
        tp: vec![false; n_pred],
        fp: vec![false; n_pred],
        covered: vec![false; n_gt],
        nearest: vec![None; n_pred],
    };
    if n_gt == 0 {
        sel.fp.fill(true);
        return sel;
    }
    for j in 0..n_pred {
        let mut best = 0;
        for (i, row) in d.iter().enumerate().take(n_gt).skip(1) {
            if row[j] < d[best][j] {
                best = i;
            }
        }
        let dist = d[best][j];
        sel.nearest[j] = Some((best, dist));
        if dist <= tau && !sel.covered[best] {
            sel.tp[j] = true;
            sel.covered[best] = true;
        } else {
            sel.fp[j] = true;
        }
    }
    sel
}

/// IoU-based one-to-one matching; returns `(gt, pred, iou)` for every pair
/// the solver assigns.
fn iou_matching(frame: &EvalFrame, config: &EvalConfig) -> Result<Vec<(usize, usize, f64)>> {
    if frame.gt.is_empty() || frame.pred.is_empty() {
        return Ok(Vec::new());
    }
    let masks = |lanes: &[Lane3D]| -> Result<Vec<BevMask>> {
        lanes
            .iter()
            .map(|l| rasterize(l, config.lane_width, config.bev_resolution))
            .collect()
    };
    let g = masks(&frame.gt)?;
    let p = masks(&frame.pred)?;
    let iou: Vec<Vec<f64>> = g.iter().map(|gm| p.iter().map(|pm| gm.iou(pm)).collect()).collect();
    let cost: Vec<Vec<f64>> = iou.iter().map(|row| row.iter().map(|v| 1.0 - v).collect()).collect();
    let m = hungarian(&cost)?;
    Ok(m.pairs().map(|(i, j)| (i, j, iou[i][j])).collect())
}

fn once_frame(frame: &EvalFrame, config: &EvalConfig) -> Result<FrameOutcome> {
    let mut out = FrameOutcome::default();
    for (i, j, iou) in iou_matching(frame, config)? {
        if !(iou > config.tau_iou) {
            continue;
        }
        let cd = unilateral_cd(&frame.gt[i], &frame.pred[j], config.n_interp)?;
        if cd < config.tau_cd {
            out.tp += 1;
            out.pairs.push(PairError { gt: i, pred: j, value: cd });
        }
    }
    out.fp = frame.pred.len() - out.tp;
    out.fn_ = frame.gt.len() - out.tp;
    Ok(out)
}

fn mbd_frame(frame: &EvalFrame, config: &EvalConfig) -> Result<FrameOutcome> {
    let mut out = once_frame(frame, config)?;
    out.pairs.clear();
    for (i, j, iou) in iou_matching(frame, config)? {
        if !(iou > config.tau_iou) {
            continue;
        }
        let g = PointCloud::from_lane(&frame.gt[i], config.n_interp)?;
        let p = PointCloud::from_lane(&frame.pred[j], config.n_interp)?;
        let value = match config.mbd_aggregation {
            MbdAggregation::PairMaxMean | MbdAggregation::DatasetMax => max_bidirectional(&g, &p),
            MbdAggregation::MeanDirectedMax => (directed_max(&g, &p) + directed_max(&p, &g)) / 2.0,
        };
        out.pairs.push(PairError { gt: i, pred: j, value });
    }
    Ok(out)
}

fn bcd_frame(frame: &EvalFrame, config: &EvalConfig) -> Result<FrameOutcome> {
    let sel = bcd_select_tp_fp(&frame.gt, &frame.pred, config)?;
    let mut out = FrameOutcome::default();
    for (j, &tp) in sel.tp.iter().enumerate() {
        if tp {
            let (i, d) = sel.nearest[j].expect("true positives have a nearest ground truth");
            out.pairs.push(PairError { gt: i, pred: j, value: d });
        }
    }
    out.tp = out.pairs.len();
    out.fp = sel.fp.iter().filter(|f| **f).count();
    out.fn_ = frame.gt.len() - out.tp;
    Ok(out)
}

fn openlane_frame(frame: &EvalFrame, config: &PointwiseConfig) -> Result<FrameOutcome> {
    let anchors = &config.y_anchors;
    let g: Vec<_> = frame.gt.iter().map(|l| resample_to_anchors(l, anchors)).collect();
    let p: Vec<_> = frame.pred.iter().map(|l| resample_to_anchors(l, anchors)).collect();
    let m = pointwise_match(&g, &p, config)?;
    let mut out = FrameOutcome::default();
    for (i, j) in m.pairs() {
        if pointwise_tp(&g[i], &p[j], config)? {
            out.tp += 1;
            out.xz.add_pair(&g[i], &p[j], config)?;
        }
    }
    out.fp = frame.pred.len() - out.tp;
    out.fn_ = frame.gt.len() - out.tp;
    Ok(out)
}

pub fn evaluate_frame(protocol: Protocol, frame: &EvalFrame, settings: &EvalSettings) -> Result<FrameOutcome> {
    match protocol {
        Protocol::Once => once_frame(frame, &settings.eval),
        Protocol::Bcd => bcd_frame(frame, &settings.eval),
        Protocol::Mbd => mbd_frame(frame, &settings.eval),
        Protocol::OpenLane => openlane_frame(frame, &settings.pointwise),
    }
}

/// Reduces frame outcomes, in the order given, into a dataset report.
pub fn aggregate(protocol: Protocol, settings: &EvalSettings, per_frame: Vec<FrameOutcome>) -> MetricReport {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut errors = CompensatedSum::new();
    let mut worst: Option<f64> = None;
    let mut xz = XzAccumulator::default();
    for f in &per_frame {
        tp += f.tp;
        fp += f.fp;
        fn_ += f.fn_;
        for pair in &f.pairs {
            errors.add(pair.value);
            worst = Some(worst.map_or(pair.value, |w| w.max(pair.value)));
        }
        xz.merge(&f.xz);
    }
    let (precision, recall, f1) = precision_recall_f1(tp, fp, fn_);
    let error = match protocol {
        Protocol::Once => ErrorStat::Cde { value: errors.mean() },
        Protocol::Bcd => ErrorStat::MeanBcd { value: errors.mean() },
        Protocol::Mbd => {
            let aggregation = settings.eval.mbd_aggregation;
            let value = match aggregation {
                MbdAggregation::DatasetMax => worst,
                _ => errors.mean(),
            };
            ErrorStat::Mbd { value, aggregation }
        }
        Protocol::OpenLane => ErrorStat::Xz { errors: xz.errors() },
    };
    MetricReport {
        protocol,
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        error,
        per_frame,
    }
}

/// Sequential evaluation of a whole dataset.
pub fn evaluate(protocol: Protocol, frames: &[EvalFrame], settings: &EvalSettings) -> Result<MetricReport> {
    settings.validate()?;
    let outcomes = frames
        .iter()
        .map(|f| evaluate_frame(protocol, f, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(protocol, settings, outcomes))
}

pub fn once_report(frames: &[EvalFrame], settings: &EvalSettings) -> Result<MetricReport> {
    evaluate(Protocol::Once, frames, settings)
}

pub fn bcd_report(frames: &[EvalFrame], settings: &EvalSettings) -> Result<MetricReport> {
    evaluate(Protocol::Bcd, frames, settings)
}

pub fn mbd_report(frames: &[EvalFrame], settings: &EvalSettings) -> Result<MetricReport> {
    evaluate(Protocol::Mbd, frames, settings)
}

pub fn openlane_report(frames: &[EvalFrame], settings: &EvalSettings) -> Result<MetricReport> {
    evaluate(Protocol::OpenLane, frames, settings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SweepRow {
    pub fn from_report(tau: f64, report: &MetricReport) -> Self {
        Self {
            tau,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
        }
    }
}

/// One report row per threshold; the threshold varied is the protocol's
/// distance threshold (see [`EvalSettings::threshold`]).
pub fn threshold_sweep(
    frames: &[EvalFrame],
    taus: &[f64],
    protocol: Protocol,
    settings: &EvalSettings,
) -> Result<Vec<SweepRow>> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidConfig("sweep thresholds must be non-empty and positive"));
    }
    taus.iter()
        .map(|&tau| {
            let s = settings.with_threshold(protocol, tau);
            evaluate(protocol, frames, &s).map(|r| SweepRow::from_report(tau, &r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn line(x: f64, y0: f64, y1: f64) -> Lane3D {
        Lane3D::from_points(vec![Point3::new(x, y0, 0.0), Point3::new(x, y1, 0.0)]).unwrap()
    }

    #[test]
    fn first_prediction_claims_the_ground_truth() {
        let gt = [line(0.0, 0.0, 30.0)];
        let pred = [line(0.05, 0.0, 30.0), line(0.0, 0.0, 30.0)];
        let sel = bcd_select_tp_fp(&gt, &pred, &EvalConfig::default()).unwrap();
        assert_eq!(sel.tp, vec![true, false]);
        assert_eq!(sel.fp, vec![false, true]);
        assert_eq!(sel.covered, vec![true]);
    }

    #[test]
    fn no_ground_truth_means_all_false_positives() {
        let pred = [line(0.0, 0.0, 10.0), line(3.0, 0.0, 10.0), line(6.0, 0.0, 10.0)];
        let sel = bcd_select_tp_fp(&[], &pred, &EvalConfig::default()).unwrap();
        assert_eq!(sel.fp, vec![true; 3]);
        assert_eq!(sel.tp, vec![false; 3]);
    }

    #[test]
    fn no_predictions_means_empty_flags() {
        let sel = bcd_select_tp_fp(&[line(0.0, 0.0, 10.0)], &[], &EvalConfig::default()).unwrap();
        assert!(sel.tp.is_empty() && sel.fp.is_empty());
        assert_eq!(sel.covered, vec![false]);
    }

    #[test]
    fn argmin_ties_go_to_the_lowest_index() {
        let gt = [line(-0.1, 0.0, 20.0), line(0.1, 0.0, 20.0)];
        let pred = [line(0.0, 0.0, 20.0)];
        let sel = bcd_select_tp_fp(&gt, &pred, &EvalConfig::default()).unwrap();
        assert_eq!(sel.nearest[0].unwrap().0, 0);
        assert_eq!(sel.covered, vec![true, false]);
    }

    #[test]
    fn prf_arithmetic() {
        let (p, r, f) = precision_recall_f1(2, 1, 1);
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        assert!((r - 2.0 / 3.0).abs() < 1e-15);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(precision_recall_f1(0, 0, 5), (0.0, 0.0, 0.0));
        let (p, r, f) = precision_recall_f1(3, 1, 2);
        assert_eq!((p, r), (0.75, 0.6));
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    fn frames(gt: Vec<Lane3D>, pred: Vec<Lane3D>) -> Vec<EvalFrame> {
        vec![EvalFrame { gt, pred }]
    }

    #[test]
    fn perfect_predictions_score_fully_on_every_protocol() {
        let lanes = vec![line(-1.75, 3.0, 50.0), line(1.75, 3.0, 60.0)];
        let f = frames(lanes.clone(), lanes);
        let s = EvalSettings::default();
        for protocol in Protocol::ALL {
            let r = evaluate(protocol, &f, &s).unwrap();
            assert_eq!((r.tp, r.fp, r.fn_), (2, 0, 0), "{protocol:?}");
            assert_eq!(r.f1, 1.0);
            if let Some(v) = r.error.value() {
                assert_eq!(v, 0.0, "{protocol:?}");
            }
        }
    }

    #[test]
    fn cd_failure_costs_a_false_positive_and_a_miss() {
        // overlapping in BEV but 0.25 m off laterally: IoU passes, CD fails
        let s = EvalSettings {
            eval: EvalConfig {
                lane_width: 1.0,
                tau_cd: 0.2,
                ..EvalConfig::default()
            },
            ..EvalSettings::default()
        };
        let f = frames(vec![line(0.0, 0.0, 30.0)], vec![line(0.25, 0.0, 30.0)]);
        let r = once_report(&f, &s).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    }

    #[test]
    fn no_predictions_anywhere() {
        let f = frames(vec![line(0.0, 0.0, 30.0)], vec![]);
        let r = bcd_report(&f, &EvalSettings::default()).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.fn_, 1);
    }

    #[test]
    fn mbd_of_uniform_offset_equals_the_offset() {
        let f = frames(vec![line(0.0, 0.0, 30.0)], vec![line(0.2, 0.0, 30.0)]);
        let s = EvalSettings {
            eval: EvalConfig {
                lane_width: 1.0,
                ..EvalConfig::default()
            },
            ..EvalSettings::default()
        };
        let r = mbd_report(&f, &s).unwrap();
        assert!((r.error.value().unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_empty_and_non_positive() {
        let f = frames(vec![], vec![]);
        let s = EvalSettings::default();
        assert!(threshold_sweep(&f, &[], Protocol::Bcd, &s).is_err());
        assert!(threshold_sweep(&f, &[0.0], Protocol::Bcd, &s).is_err());
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(Protocol::from_name(p.name()), Some(p));
        }
        assert_eq!(Protocol::from_name("nope"), None);
    }
}
