//! Report files. Structured reports are pretty-printed JSON with a format
//! version, the resolved configuration and the assumptions behind it; they
//! contain no timestamps, so identical runs produce identical bytes.

use std::io::Write;
use std::path::Path;

use lanekit_core::metrics::{ErrorStat, FrameOutcome, PairError, SweepRow};
use lanekit_core::{EvalSettings, MetricReport, Protocol};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::AtomicFile;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Defaults that are choices of this implementation rather than published
/// values.
pub const ASSUMPTIONS: &[&str] = &[
    "tau_iou and lane_width are unpublished; defaults 0.3 and 0.3 m",
    "BEV cells are 0.05 m squares on a lattice anchored at the ground origin",
    "unilateral distance measures ground-truth samples against the prediction polyline",
    "mbd pairs are IoU-matched pairs above tau_iou; pair value per mbd_aggregation",
    "pointwise threshold is closed and the tp fraction test is >=",
    "pointwise anchor cost is capped at cap_factor * tau_dist",
    "bcd predictions are visited in file order; see prediction_order_digest",
];

#[derive(Debug, Serialize)]
pub struct FrameEntry<'a> {
    pub frame_id: &'a str,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pairs: &'a [PairError],
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub error: ErrorStat,
}

#[derive(Debug, Serialize)]
pub struct EvalReport<'a> {
    pub format_version: u32,
    pub protocol: Protocol,
    pub config: &'a EvalSettings,
    pub assumptions: &'a [&'a str],
    pub frames: usize,
    pub prediction_order_digest: &'a str,
    pub summary: Summary,
    pub per_frame: Vec<FrameEntry<'a>>,
}

impl<'a> EvalReport<'a> {
    pub fn new(report: &'a MetricReport, settings: &'a EvalSettings, ids: &'a [String], digest: &'a str) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            protocol: report.protocol,
            config: settings,
            assumptions: ASSUMPTIONS,
            frames: ids.len(),
            prediction_order_digest: digest,
            summary: Summary {
                tp: report.tp,
                fp: report.fp,
                fn_: report.fn_,
                precision: report.precision,
                recall: report.recall,
                f1: report.f1,
                error: report.error,
            },
            per_frame: ids
                .iter()
                .zip(&report.per_frame)
                .map(|(id, f): (&String, &FrameOutcome)| FrameEntry {
                    frame_id: id,
                    tp: f.tp,
                    fp: f.fp,
                    fn_: f.fn_,
                    pairs: &f.pairs,
                })
                .collect(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = AtomicFile::create(path)?;
    let w = file.writer();
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    file.commit()
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_file(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut file = AtomicFile::create(path)?;
    write_sweep_csv(file.writer(), rows).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    file.commit()
}

/// `key = value` lines with keys padded to a common width.
pub fn summary_lines(pairs: &[(&str, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    pairs.iter().map(|(k, v)| format!("{k:<width$} = {v}\n")).collect()
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "absent".to_string(), |v| format!("{v:.6}"))
}

pub fn eval_summary(report: &MetricReport, frames: usize) -> String {
    let mut pairs = vec![
        ("protocol", report.protocol.name().to_string()),
        ("frames", frames.to_string()),
        ("tp", report.tp.to_string()),
        ("fp", report.fp.to_string()),
        ("fn", report.fn_.to_string()),
        ("precision", format!("{:.2}", 100.0 * report.precision)),
        ("recall", format!("{:.2}", 100.0 * report.recall)),
        ("f1", format!("{:.2}", 100.0 * report.f1)),
    ];
    match report.error {
        ErrorStat::Cde { value } => pairs.push(("cde", fmt_opt(value))),
        ErrorStat::MeanBcd { value } => pairs.push(("mean_bcd", fmt_opt(value))),
        ErrorStat::Mbd { value, aggregation } => {
            pairs.push(("mbd", fmt_opt(value)));
            pairs.push(("mbd_aggregation", format!("{aggregation:?}")));
        }
        ErrorStat::Xz { errors } => {
            pairs.push(("x_near", fmt_opt(errors.x_near)));
            pairs.push(("x_far", fmt_opt(errors.x_far)));
            pairs.push(("z_near", fmt_opt(errors.z_near)));
            pairs.push(("z_far", fmt_opt(errors.z_far)));
        }
    }
    summary_lines(&pairs)
}
