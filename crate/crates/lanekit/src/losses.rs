//! Loss evaluation over frame files.

use std::collections::HashMap;

use lanekit_core::losses::{loss_total, LossBreakdown, LossConfig, PredictedLane, PredictionFrame, TargetFrame, TargetLane};
use lanekit_core::SampleGrid;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::FrameRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameLoss {
    pub frame_id: String,
    /// `None` when no prediction of the frame carries uncertainties.
    pub unc: Option<f64>,
    pub vis: f64,
    pub loc: f64,
    pub ce: f64,
    pub fit: f64,
    pub point: f64,
    pub curve: f64,
    pub total: f64,
}

impl FrameLoss {
    fn new(frame_id: String, b: &LossBreakdown, has_unc: bool) -> Self {
        Self {
            frame_id,
            unc: has_unc.then_some(b.unc),
            vis: b.vis,
            loc: b.loc,
            ce: b.ce,
            fit: b.fit,
            point: b.point,
            curve: b.curve,
            total: b.total,
        }
    }
}

fn missing(frame: &FrameRecord, field: String) -> Error {
    Error::MissingField {
        frame_id: frame.frame_id.clone(),
        field,
    }
}

pub fn target_frame(record: &FrameRecord) -> Result<TargetFrame> {
    let lanes = record
        .lanes
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(TargetLane {
                points: l.points3(),
                visibility: l.visible_flags(),
                curve: l.curve.ok_or_else(|| missing(record, format!("lanes[{i}].curve")))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TargetFrame { lanes })
}

pub fn prediction_frame(record: &FrameRecord) -> Result<PredictionFrame> {
    let lanes = record
        .lanes
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(PredictedLane {
                points: l.points3(),
                visibility: l.visibility.clone(),
                curve: l.curve.ok_or_else(|| missing(record, format!("lanes[{i}].curve")))?,
                uncertainties: l.uncertainty.as_ref().map(|u| u.iter().map(|w| (w[0], w[1])).collect()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictionFrame { lanes })
}

/// Losses of every ground-truth frame, in file order. Prediction frames
/// must all have a ground-truth frame.
pub fn frame_losses(
    gt: &[FrameRecord],
    pred: &[FrameRecord],
    grid: &SampleGrid,
    config: &LossConfig,
) -> Result<Vec<FrameLoss>> {
    let by_id: HashMap<&str, &FrameRecord> = pred.iter().map(|p| (p.frame_id.as_str(), p)).collect();
    let gt_ids: HashMap<&str, ()> = gt.iter().map(|g| (g.frame_id.as_str(), ())).collect();
    if let Some(p) = pred.iter().find(|p| !gt_ids.contains_key(p.frame_id.as_str())) {
        return Err(Error::MissingFrame(p.frame_id.clone()));
    }
    gt.iter()
        .map(|g| {
            let target = target_frame(g)?;
            let prediction = match by_id.get(g.frame_id.as_str()) {
                Some(p) => prediction_frame(p)?,
                None => PredictionFrame::default(),
            };
            let has_unc = prediction.lanes.iter().any(|l| l.uncertainties.is_some());
            let b = loss_total(&target, &prediction, &g.camera, grid, config)?;
            Ok(FrameLoss::new(g.frame_id.clone(), &b, has_unc))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossTotals {
    pub frames: usize,
    pub unc: Option<f64>,
    pub vis: f64,
    pub loc: f64,
    pub ce: f64,
    pub fit: f64,
    pub point: f64,
    pub curve: f64,
    pub total: f64,
}

pub fn totals(frames: &[FrameLoss]) -> LossTotals {
    let sum = |f: fn(&FrameLoss) -> f64| frames.iter().map(f).sum::<f64>();
    let unc: Vec<f64> = frames.iter().filter_map(|f| f.unc).collect();
    LossTotals {
        frames: frames.len(),
        unc: (!unc.is_empty()).then(|| unc.iter().sum()),
        vis: sum(|f| f.vis),
        loc: sum(|f| f.loc),
        ce: sum(|f| f.ce),
        fit: sum(|f| f.fit),
        point: sum(|f| f.point),
        curve: sum(|f| f.curve),
        total: sum(|f| f.total),
    }
}
