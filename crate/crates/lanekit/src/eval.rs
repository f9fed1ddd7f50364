//! Frame alignment and frame-parallel evaluation.

use std::collections::HashMap;

use lanekit_core::metrics::{aggregate, evaluate_frame, SweepRow};
use lanekit_core::{EvalFrame, EvalSettings, MetricReport, Protocol};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::FrameRecord;

/// Evaluation frames in ground-truth file order.
#[derive(Debug, Clone, Default)]
pub struct AlignedFrames {
    pub ids: Vec<String>,
    pub frames: Vec<EvalFrame>,
}

/// Pairs prediction frames with ground-truth frames by `frame_id`. A
/// ground-truth frame without predictions is evaluated against none; a
/// prediction frame without ground truth is an error.
pub fn align(gt: &[FrameRecord], pred: &[FrameRecord]) -> Result<AlignedFrames> {
    let index: HashMap<&str, usize> = gt.iter().enumerate().map(|(i, r)| (r.frame_id.as_str(), i)).collect();
    let mut preds: Vec<Option<&FrameRecord>> = vec![None; gt.len()];
    for p in pred {
        match index.get(p.frame_id.as_str()) {
            Some(&i) => preds[i] = Some(p),
            None => return Err(Error::MissingFrame(p.frame_id.clone())),
        }
    }
    let mut out = AlignedFrames::default();
    for (g, p) in gt.iter().zip(preds) {
        out.ids.push(g.frame_id.clone());
        out.frames.push(EvalFrame {
            gt: g.lanes3d()?,
            pred: match p {
                Some(p) => p.lanes3d()?,
                None => Vec::new(),
            },
        });
    }
    Ok(out)
}

/// Digest of the prediction content in evaluation order. The greedy
/// selection depends on prediction order, so reports carry this value.
pub fn prediction_order_digest(frames: &AlignedFrames) -> String {
    let mut h = Sha256::new();
    for (id, f) in frames.ids.iter().zip(&frames.frames) {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
        h.update((f.pred.len() as u64).to_le_bytes());
        for lane in &f.pred {
            h.update((lane.len() as u64).to_le_bytes());
            for (p, v) in lane.points().iter().zip(lane.visibility()) {
                for c in [p.x, p.y, p.z] {
                    h.update(c.to_bits().to_le_bytes());
                }
                h.update([*v as u8]);
            }
        }
    }
    hex::encode(h.finalize())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Frames are evaluated on `threads` workers; outcomes are reduced in frame
/// order, so the report does not depend on the thread count.
pub fn evaluate_parallel(
    protocol: Protocol,
    frames: &[EvalFrame],
    settings: &EvalSettings,
    threads: usize,
) -> Result<MetricReport> {
    settings.validate()?;
    let outcomes = pool(threads)?.install(|| {
        frames
            .par_iter()
            .map(|f| evaluate_frame(protocol, f, settings))
            .collect::<lanekit_core::Result<Vec<_>>>()
    })?;
    Ok(aggregate(protocol, settings, outcomes))
}

pub fn sweep_parallel(
    protocol: Protocol,
    frames: &[EvalFrame],
    taus: &[f64],
    settings: &EvalSettings,
    threads: usize,
) -> Result<Vec<SweepRow>> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config("sweep thresholds must be non-empty and positive".into()));
    }
    taus.iter()
        .map(|&tau| {
            let s = settings.with_threshold(protocol, tau);
            evaluate_parallel(protocol, frames, &s, threads).map(|r| SweepRow::from_report(tau, &r))
        })
        .collect()
}

/// Parses `start:stop:step` into an inclusive list of thresholds. The
/// count is rounded so that floating-point steps do not drop the endpoint.
pub fn parse_tau_range(range: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("threshold range {range:?} is not start:stop:step"));
    let parts: Vec<f64> = range
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(start > 0.0 && step > 0.0 && stop >= start && stop.is_finite()) {
        return Err(Error::Config(format!("threshold range {range:?} is empty or non-positive")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    // snap to a 1e-12 grid so 0.1 + 2 * 0.1 prints and compares as 0.3
    Ok((0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
}
