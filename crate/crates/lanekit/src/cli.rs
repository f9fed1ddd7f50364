//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lanekit_core::fit::{fit_curves, FitOptions};
use lanekit_core::metrics::MbdAggregation;
use lanekit_core::{CameraModel, CurveForm, Protocol};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{parse_gammas, CliConfig};
use crate::error::{exit, Error, Result};
use crate::eval::{align, evaluate_parallel, parse_tau_range, prediction_order_digest, sweep_parallel};
use crate::format::{read_frames, AtomicFile, FrameWriter};
use crate::losses::{frame_losses, totals};
use crate::report::{eval_summary, fmt_opt, summary_lines, write_json, write_sweep_csv, write_sweep_file, EvalReport};
use crate::synth::generate;

#[derive(Debug, Parser)]
#[command(name = "lanekit", version, about = "3D lane evaluation, reference losses and synthetic scenarios")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate predictions against ground truth under one protocol.
    Eval(EvalArgs),
    /// Evaluate over a range of distance thresholds and write a CSV table.
    Sweep(SweepArgs),
    /// Generate synthetic ground truth and, optionally, noisy predictions.
    Synth(SynthArgs),
    /// Compute the itemized reference losses per frame.
    Loss(LossArgs),
    /// Fit shared-curvature image curves to 2D lane points.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Once,
    Bcd,
    Mbd,
    Openlane,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Once => Protocol::Once,
            ProtocolArg::Bcd => Protocol::Bcd,
            ProtocolArg::Mbd => Protocol::Mbd,
            ProtocolArg::Openlane => Protocol::OpenLane,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    PairMaxMean,
    DatasetMax,
    MeanDirectedMax,
}

impl From<AggregationArg> for MbdAggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::PairMaxMean => MbdAggregation::PairMaxMean,
            AggregationArg::DatasetMax => MbdAggregation::DatasetMax,
            AggregationArg::MeanDirectedMax => MbdAggregation::MeanDirectedMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Road,
    Poly3,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON config file; flags and LANEKIT_* variables override it.
    #[arg(long, env = "LANEKIT_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricFlags {
    /// Unilateral distance threshold, meters [default: 0.3]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_TAU_CD")]
    pub tau_cd: Option<f64>,
    /// BEV IoU threshold [default: 0.3]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_TAU_IOU")]
    pub tau_iou: Option<f64>,
    /// Bidirectional distance threshold, meters [default: 0.3]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_TAU_BCD")]
    pub tau_bcd: Option<f64>,
    /// BEV stroke width, meters [default: 0.3]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_LANE_WIDTH")]
    pub lane_width: Option<f64>,
    /// BEV cell size, meters [default: 0.05]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_BEV_RESOLUTION")]
    pub bev_resolution: Option<f64>,
    /// Points per interpolated lane [default: 100]
    #[arg(long, env = "LANEKIT_N_INTERP")]
    pub n_interp: Option<usize>,
    /// MBD pair value and aggregation [default: pair-max-mean]
    #[arg(long, env = "LANEKIT_MBD_AGGREGATION", value_enum)]
    pub mbd_aggregation: Option<AggregationArg>,
    /// Pointwise distance threshold, meters [default: 1.5]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_TAU_DIST")]
    pub tau_dist: Option<f64>,
    /// Pointwise in-threshold fraction for a true positive [default: 0.75]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_TP_FRACTION")]
    pub tp_fraction: Option<f64>,
    /// Pointwise matching cost cap as a multiple of tau-dist [default: 1.5]
    #[arg(long, allow_negative_numbers = true, env = "LANEKIT_CAP_FACTOR")]
    pub cap_factor: Option<f64>,
    /// Worker threads [default: available cores]
    #[arg(long, env = "LANEKIT_THREADS")]
    pub threads: Option<usize>,
}

impl MetricFlags {
    fn apply(&self, c: &mut CliConfig) {
        let e = &mut c.eval;
        set(&mut e.tau_cd, self.tau_cd);
        set(&mut e.tau_iou, self.tau_iou);
        set(&mut e.tau_bcd, self.tau_bcd);
        set(&mut e.lane_width, self.lane_width);
        set(&mut e.bev_resolution, self.bev_resolution);
        set(&mut e.n_interp, self.n_interp);
        set(&mut e.mbd_aggregation, self.mbd_aggregation.map(Into::into));
        let p = &mut c.pointwise;
        set(&mut p.tau_dist, self.tau_dist);
        set(&mut p.tp_fraction, self.tp_fraction);
        set(&mut p.cap_factor, self.cap_factor);
    }

    fn threads(&self) -> Result<usize> {
        match self.threads {
            Some(0) => Err(Error::Config("--threads must be at least 1".into())),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Ground-truth frame file
    #[arg(long)]
    pub gt: PathBuf,
    /// Prediction frame file
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, env = "LANEKIT_PROTOCOL")]
    pub protocol: ProtocolArg,
    /// Write the structured JSON report here
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, env = "LANEKIT_PROTOCOL")]
    pub protocol: ProtocolArg,
    /// Inclusive threshold range start:stop:step, meters
    #[arg(long)]
    pub taus: String,
    /// CSV output; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub metrics: MetricFlags,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Number of frames [default: 100]
    #[arg(long)]
    pub frames: Option<usize>,
    /// Lanes per frame [default: 4]
    #[arg(long)]
    pub lanes: Option<usize>,
    /// Random seed [default: 42]
    #[arg(long, env = "LANEKIT_SEED")]
    pub seed: Option<u64>,
    /// Lateral noise at y = 0, meters [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub noise_w0: Option<f64>,
    /// Lateral noise growth per meter of depth [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub noise_w_slope: Option<f64>,
    /// Vertical noise at y = 0, meters [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub noise_h0: Option<f64>,
    /// Vertical noise growth per meter of depth [default: 0]
    #[arg(long, allow_negative_numbers = true)]
    pub noise_h_slope: Option<f64>,
    /// Largest quadratic lateral coefficient, 1/m [default: 0.001]
    #[arg(long, allow_negative_numbers = true)]
    pub curvature_max: Option<f64>,
    /// Ground-truth output file
    #[arg(long)]
    pub out: PathBuf,
    /// Also write noisy predictions to this file
    #[arg(long)]
    pub emit_pred: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Six loss weights g1,...,g6 [default: 0.5,2,10,3,5,2]
    #[arg(long, value_parser = parse_gammas, env = "LANEKIT_GAMMAS")]
    pub gammas: Option<[f64; 6]>,
    /// Classification weight of unmatched predictions [default: 1]
    #[arg(long, allow_negative_numbers = true)]
    pub background_weight: Option<f64>,
    /// Write per-frame losses and totals as JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// 2D lane file: one JSON frame per line, {"frame_id", "lanes": [[[u, v], ...], ...]}
    #[arg(long = "frame-2d")]
    pub frame_2d: PathBuf,
    /// Camera JSON; fixes the image size and the horizon row
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Curve form [default: road]
    #[arg(long, value_enum)]
    pub form: Option<FormArg>,
    /// Estimate the horizon even when a camera is given
    #[arg(long)]
    pub free_horizon: bool,
    /// Write fitted curves as JSON lines here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command, writing the summary to `out`.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => exit::OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Loss(a) => cmd_loss(&a, out),
        Command::Fit(a) => cmd_fit(&a, out),
    }
}

fn stdout_error(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn resolve(config: &ConfigArgs, metrics: Option<&MetricFlags>) -> Result<CliConfig> {
    let mut c = CliConfig::load_or_default(config.config.as_deref())?;
    if let Some(m) = metrics {
        m.apply(&mut c);
    }
    c.validate()?;
    Ok(c)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let config = resolve(&a.config, Some(&a.metrics))?;
    let settings = config.settings();
    let threads = a.metrics.threads()?;
    let frames = align(&read_frames(&a.gt)?, &read_frames(&a.pred)?)?;
    let report = evaluate_parallel(a.protocol.into(), &frames.frames, &settings, threads)?;
    if let Some(path) = &a.report {
        let digest = prediction_order_digest(&frames);
        write_json(path, &EvalReport::new(&report, &settings, &frames.ids, &digest))?;
    }
    out.write_all(eval_summary(&report, frames.ids.len()).as_bytes())
        .map_err(stdout_error)
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    let config = resolve(&a.config, Some(&a.metrics))?;
    let taus = parse_tau_range(&a.taus)?;
    let threads = a.metrics.threads()?;
    let frames = align(&read_frames(&a.gt)?, &read_frames(&a.pred)?)?;
    let rows = sweep_parallel(a.protocol.into(), &frames.frames, &taus, &config.settings(), threads)?;
    match &a.out {
        Some(path) => write_sweep_file(path, &rows),
        None => write_sweep_csv(out, &rows).map_err(|e| stdout_error(io::Error::other(e))),
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve(&a.config, None)?;
    let p = &mut config.synth;
    set(&mut p.frames, a.frames);
    set(&mut p.lanes, a.lanes);
    set(&mut p.curvature_max, a.curvature_max);
    let n = &mut p.noise;
    set(&mut n.seed, a.seed);
    set(&mut n.sigma_w0, a.noise_w0);
    set(&mut n.sigma_w_slope, a.noise_w_slope);
    set(&mut n.sigma_h0, a.noise_h0);
    set(&mut n.sigma_h_slope, a.noise_h_slope);
    let params = config.synth;
    let frames = generate(&params)?;

    let mut gt = FrameWriter::create(&a.out)?;
    let mut pred = a.emit_pred.as_ref().map(FrameWriter::create).transpose()?;
    for f in &frames {
        gt.write(&f.gt)?;
        if let Some(w) = pred.as_mut() {
            w.write(&f.pred)?;
        }
    }
    gt.finish()?;
    if let Some(w) = pred {
        w.finish()?;
    }

    let mut lines = vec![
        ("frames", params.frames.to_string()),
        ("lanes", params.lanes.to_string()),
        ("seed", params.noise.seed.to_string()),
        ("sigma_w0", params.noise.sigma_w0.to_string()),
        ("sigma_w_slope", params.noise.sigma_w_slope.to_string()),
        ("sigma_h0", params.noise.sigma_h0.to_string()),
        ("sigma_h_slope", params.noise.sigma_h_slope.to_string()),
        ("curvature_max", params.curvature_max.to_string()),
        ("gt", a.out.display().to_string()),
        ("gt_sha256", sha256_file(&a.out)?),
    ];
    if let Some(path) = &a.emit_pred {
        lines.push(("pred", path.display().to_string()));
        lines.push(("pred_sha256", sha256_file(path)?));
    }
    out.write_all(summary_lines(&lines).as_bytes()).map_err(stdout_error)
}

pub fn cmd_loss(a: &LossArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve(&a.config, None)?;
    set(&mut config.loss.gamma, a.gammas);
    set(&mut config.loss.background_weight, a.background_weight);
    config.validate()?;
    let frames = frame_losses(&read_frames(&a.gt)?, &read_frames(&a.pred)?, &config.grid, &config.loss)?;
    let t = totals(&frames);

    let mut text = format!(
        "{:<12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}\n",
        "frame_id", "unc", "vis", "loc", "ce", "fit", "point", "curve", "total"
    );
    let num = |v: f64| format!("{v:>12.6}");
    for f in &frames {
        text.push_str(&format!(
            "{:<12} {:>12} {} {} {} {} {} {} {}\n",
            f.frame_id,
            fmt_opt(f.unc),
            num(f.vis),
            num(f.loc),
            num(f.ce),
            num(f.fit),
            num(f.point),
            num(f.curve),
            num(f.total)
        ));
    }
    let g = config.loss.gamma.map(|v| v.to_string()).join(",");
    text.push_str(&summary_lines(&[
        ("frames", t.frames.to_string()),
        ("gamma", g),
        ("unc", fmt_opt(t.unc)),
        ("vis", format!("{:.6}", t.vis)),
        ("loc", format!("{:.6}", t.loc)),
        ("ce", format!("{:.6}", t.ce)),
        ("fit", format!("{:.6}", t.fit)),
        ("point", format!("{:.6}", t.point)),
        ("curve", format!("{:.6}", t.curve)),
        ("total", format!("{:.6}", t.total)),
    ]));
    if let Some(path) = &a.out {
        #[derive(Serialize)]
        struct LossReport<'a> {
            format_version: u32,
            loss: &'a lanekit_core::losses::LossConfig,
            frames: &'a [crate::losses::FrameLoss],
            totals: &'a crate::losses::LossTotals,
        }
        write_json(
            path,
            &LossReport {
                format_version: crate::report::REPORT_FORMAT_VERSION,
                loss: &config.loss,
                frames: &frames,
                totals: &t,
            },
        )?;
    }
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame2d {
    pub frame_id: String,
    pub lanes: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneFit {
    pub beta_prime: f64,
    pub beta_dprime: f64,
    pub v_low: f64,
    pub v_up: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub frame_id: String,
    pub form: CurveForm,
    pub rho: [f64; 4],
    pub lanes: Vec<LaneFit>,
    pub rms: f64,
    pub rms_history: Vec<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str, line: usize) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line,
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

pub fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let camera: Option<CameraModel> = match &a.camera {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cam: CameraModel = read_json(path, &text, 1)?;
            cam.validate().map_err(|e| Error::Config(e.to_string()))?;
            Some(cam)
        }
        None => None,
    };
    let image = camera.unwrap_or_default();
    let form = match a.form.unwrap_or(FormArg::Road) {
        FormArg::Road => CurveForm::RoadProjection,
        FormArg::Poly3 => CurveForm::Poly3,
    };
    let horizon = match (&camera, a.free_horizon) {
        (Some(c), false) => Some(c.horizon_row()),
        _ => None,
    };
    let options = FitOptions {
        form,
        horizon,
        ..FitOptions::default()
    };

    let text = fs::read_to_string(&a.frame_2d).map_err(|e| Error::io(&a.frame_2d, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let frame: Frame2d = read_json(&a.frame_2d, line, i + 1)?;
        let lanes: Vec<Vec<(f64, f64)>> = frame.lanes.iter().map(|l| l.iter().map(|p| (p[0], p[1])).collect()).collect();
        let fit = fit_curves(&lanes, (image.image_h, image.image_w), &options)?;
        records.push(FitRecord {
            frame_id: frame.frame_id,
            form,
            rho: fit.curves.first().map_or([0.0; 4], |c| c.rho),
            lanes: fit
                .curves
                .iter()
                .map(|c| LaneFit {
                    beta_prime: c.beta_prime,
                    beta_dprime: c.beta_dprime,
                    v_low: c.v_low,
                    v_up: c.v_up,
                })
                .collect(),
            rms: fit.rms,
            rms_history: fit.rms_history,
        });
    }

    if let Some(path) = &a.out {
        let mut file = AtomicFile::create(path)?;
        for r in &records {
            let w = file.writer();
            serde_json::to_writer(&mut *w, r).map_err(|e| Error::io(path, e.into()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        file.commit()?;
    }
    let mut text = String::new();
    for r in &records {
        let rho = r.rho.map(|v| format!("{v:.9e}")).join(",");
        text.push_str(&format!("{} lanes={} rms={:.3e} rho={}\n", r.frame_id, r.lanes.len(), r.rms, rho));
    }
    let worst = records.iter().map(|r| r.rms).fold(0.0, f64::max);
    text.push_str(&summary_lines(&[
        ("frames", records.len().to_string()),
        ("form", format!("{form:?}")),
        ("horizon", horizon.map_or("estimated".into(), |h| h.to_string())),
        ("max_rms", format!("{worst:.3e}")),
    ]));
    out.write_all(text.as_bytes()).map_err(stdout_error)
}
