//! Subcommands of the `tsdetect` binary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use tsdetect::config::Config;
use tsdetect::eval::{
    evaluate_pairs, false_positive_rate, pair_frames, parse_threshold_range, recall_trace,
    trace_to_tsv, EvalConfig,
};
use tsdetect::geom::{FrameDetections, SequenceDataset};
use tsdetect::io::{format_detections, read_detections, read_weights, write_weights, BoxKind};
use tsdetect::model::{ModelDims, TemporalModel};
use tsdetect::pac::{
    build_graph, classical_nms, corrections, pac_select, soft_nms, PacParams, SoftNmsMode,
};
use tsdetect::synth::{generate, render_sequence, SynthConfig};
use tsdetect::tensor::Tensor;

/// Failure classes mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit code 2.
    Usage(String),
    /// IO or malformed data: exit code 1.
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "tsdetect", version, about = "Temporal detection post-processing and evaluation")]
pub struct Cli {
    /// Configuration file with [pac], [eval], [synth] and [temporal] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-score and suppress candidate boxes frame by frame.
    Postprocess(PostprocessArgs),
    /// Compute AP, precision/recall/F1 and mean IoU against ground truth.
    Eval(EvalArgs),
    /// Generate synthetic ground truth and candidate boxes.
    Synth(SynthArgs),
    /// Run GT-Conv and HQIM over a frame sequence and summarise the features.
    TemporalDemo(TemporalArgs),
    /// Write a TSDW1 weights file for the temporal demo.
    InitWeights(InitArgs),
    /// Evaluate PAC over several low/high-neighbour thresholds.
    SweepDelta(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Pac,
    Nms,
    Softnms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SoftMode {
    Linear,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct PacFlags {
    /// Neighbour-graph IoU threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Low/high-neighbour IoU threshold.
    #[arg(long)]
    pub delta: Option<f64>,
    /// IoU threshold of the final suppression.
    #[arg(long)]
    pub nms_iou: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PostprocessArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pac: PacFlags,
    /// Gaussian Soft-NMS spread.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub soft_mode: Option<SoftMode>,
    /// Write per-box PAC correction terms (pac only).
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalFlags {
    /// IoU thresholds as lo:step:hi.
    #[arg(long)]
    pub ap_range: Option<String>,
    /// Minimum score for precision, recall, F1 and mean IoU.
    #[arg(long)]
    pub score_thresh: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub eval: EvalFlags,
    /// Also report false positives on frames without ground truth.
    #[arg(long)]
    pub negative: bool,
    /// Write a per-frame hit/miss trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_gt: PathBuf,
    #[arg(long)]
    pub out_cand: PathBuf,
    /// Also write grayscale PGM frames of every sequence here.
    #[arg(long)]
    pub raster_dir: Option<PathBuf>,
    /// Raster size as WxH.
    #[arg(long, default_value = "64x64")]
    pub raster_size: String,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// A directory of PGM/PNG frames (sorted by name) or `synthetic`.
    #[arg(long, default_value = "synthetic")]
    pub frames: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of synthetic frames.
    #[arg(long, default_value_t = 8)]
    pub n_frames: u32,
    /// Synthetic frame size as WxH.
    #[arg(long, default_value = "32x32")]
    pub size: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// All weights zero.
    #[arg(long, conflicts_with = "zero_calibration")]
    pub zero: bool,
    /// Random base and cell weights with zero calibration generators.
    #[arg(long)]
    pub zero_calibration: bool,
    #[arg(long, default_value_t = 1)]
    pub in_channels: usize,
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value_t = 4)]
    pub summary_channels: usize,
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated delta values.
    #[arg(long, default_value = "0.6,0.7,0.8,0.9")]
    pub deltas: String,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub nms_iou: Option<f64>,
    #[command(flatten)]
    pub eval: EvalFlags,
    /// Write one full report per delta into this directory.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Config::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_dets(path: &Path, kind: BoxKind) -> Result<SequenceDataset> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_detections(std::io::BufReader::new(file), kind)
        .with_context(|| format!("parsing {}", path.display()))?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(fs::write(path, text).with_context(|| format!("writing {}", path.display()))?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| usage(format!("size {s:?} must be WxH")))?;
    match (w.parse::<usize>(), h.parse::<usize>()) {
        (Ok(w), Ok(h)) if w > 0 && h > 0 => Ok((w, h)),
        _ => Err(usage(format!("size {s:?} must be WxH with positive integers"))),
    }
}

fn pac_params(cfg: &Config, flags: &PacFlags) -> Result<PacParams> {
    PacParams::new(
        flags.theta.unwrap_or(cfg.pac.theta),
        flags.delta.unwrap_or(cfg.pac.delta),
        flags.nms_iou.unwrap_or(cfg.pac.nms_iou),
    )
    .map_err(|e| usage(e.to_string()))
}

fn eval_config(cfg: &Config, flags: &EvalFlags) -> Result<EvalConfig> {
    let range = flags.ap_range.as_deref().unwrap_or(&cfg.eval.ap_range);
    let thresholds = parse_threshold_range(range).map_err(|e| usage(e.to_string()))?;
    let score_thresh = flags.score_thresh.unwrap_or(cfg.eval.score_thresh);
    if !(0.0..=1.0).contains(&score_thresh) {
        return Err(usage(format!("score threshold {score_thresh} outside [0, 1]")));
    }
    Ok(EvalConfig {
        thresholds,
        score_thresh,
        ..EvalConfig::default()
    })
}

/// Applies `f` to every frame in parallel, keeping frame order.
fn map_frames_par<F>(ds: &SequenceDataset, f: F) -> SequenceDataset
where
    F: Fn(&FrameDetections) -> FrameDetections + Sync + Send,
{
    SequenceDataset::new(ds.frames.par_iter().map(f).collect())
}

fn postprocess_with(
    ds: &SequenceDataset,
    method: Method,
    params: &PacParams,
    soft: Option<(SoftNmsMode, f64)>,
) -> anyhow::Result<SequenceDataset> {
    let frame = |f: &FrameDetections, boxes| FrameDetections::new(f.sequence_id.clone(), f.frame_index, boxes);
    Ok(match method {
        Method::Pac => map_frames_par(ds, |f| frame(f, pac_select(&f.boxes, params))),
        Method::Nms => map_frames_par(ds, |f| frame(f, classical_nms(&f.boxes, params.nms_iou()))),
        Method::Softnms => {
            let (mode, sigma) = soft.expect("soft parameters resolved");
            let frames = ds
                .frames
                .par_iter()
                .map(|f| soft_nms(&f.boxes, params.nms_iou(), mode, sigma).map(|b| frame(f, b)))
                .collect::<std::result::Result<Vec<_>, tsdetect::pac::PacError>>()?;
            SequenceDataset::new(frames)
        }
    })
}

fn pac_plot_data(ds: &SequenceDataset, params: &PacParams) -> String {
    let rows: Vec<String> = ds
        .frames
        .par_iter()
        .map(|f| {
            let g = build_graph(&f.boxes, params.theta()).expect("validated theta");
            let mut s = String::new();
            for (i, c) in corrections(&g, params.delta()).expect("validated delta").iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    f.sequence_id, f.frame_index, i, c.original, c.enhancement, c.suppression, c.corrected
                );
            }
            s
        })
        .collect();
    format!("sequence\tframe\tbox\tscore\tenhancement\tsuppression\tcorrected\n{}", rows.concat())
}

fn cmd_postprocess(cfg: &Config, a: &PostprocessArgs) -> Result<()> {
    let params = pac_params(cfg, &a.pac)?;
    if a.method != Method::Pac && (a.pac.theta.is_some() || a.pac.delta.is_some()) {
        return Err(usage("--theta and --delta only apply to --method pac"));
    }
    if a.method != Method::Softnms && (a.sigma.is_some() || a.soft_mode.is_some()) {
        return Err(usage("--sigma and --soft-mode only apply to --method softnms"));
    }
    if a.method != Method::Pac && a.plot_data.is_some() {
        return Err(usage("--plot-data only applies to --method pac"));
    }
    let soft = match a.method {
        Method::Softnms => {
            let mode = match a.soft_mode.unwrap_or(SoftMode::Gaussian) {
                SoftMode::Linear => SoftNmsMode::Linear,
                SoftMode::Gaussian => SoftNmsMode::Gaussian,
            };
            let sigma = a.sigma.unwrap_or(0.5);
            if !(sigma > 0.0) {
                return Err(usage(format!("--sigma must be positive, got {sigma}")));
            }
            Some((mode, sigma))
        }
        _ => None,
    };
    let ds = read_dets(&a.input, BoxKind::Scored)?;
    let out = postprocess_with(&ds, a.method, &params, soft)?;
    write_text(&a.out, &format_detections(&out, BoxKind::Scored))?;
    if let Some(p) = &a.plot_data {
        write_text(p, &pac_plot_data(&ds, &params))?;
    }
    Ok(())
}

/// Full evaluation text as printed by `eval`.
pub fn eval_report(pred: &SequenceDataset, gt: &SequenceDataset, ecfg: &EvalConfig, negative: bool) -> anyhow::Result<String> {
    let pairs = pair_frames(pred, gt)?;
    let mut text = evaluate_pairs(&pairs, ecfg)?.to_tsv();
    if negative {
        let frames: Vec<FrameDetections> = pairs
            .iter()
            .filter(|p| p.gts.is_empty())
            .map(|p| FrameDetections::new(p.sequence_id, p.frame_index, p.preds.to_vec()))
            .collect();
        text.push_str(&false_positive_rate(&frames, ecfg.score_thresh)?.to_tsv());
    }
    Ok(text)
}

fn cmd_eval(cfg: &Config, a: &EvalArgs) -> Result<()> {
    let ecfg = eval_config(cfg, &a.eval)?;
    let pred = read_dets(&a.pred, BoxKind::Scored)?;
    let gt = read_dets(&a.gt, BoxKind::GroundTruth)?;
    let text = eval_report(&pred, &gt, &ecfg, a.negative)?;
    if let Some(path) = &a.trace {
        let pairs = pair_frames(&pred, &gt).map_err(anyhow::Error::from)?;
        let rows = recall_trace(&pairs, ecfg.operating_iou, ecfg.score_thresh);
        write_text(path, &trace_to_tsv(&rows))?;
    }
    emit(a.out.as_deref(), &text)
}

fn cmd_synth(cfg: &Config, a: &SynthArgs) -> Result<()> {
    let mut scfg = cfg.synth.clone();
    if let Some(seed) = a.seed {
        scfg.seed = seed;
    }
    scfg.validate().map_err(|e| usage(e.to_string()))?;
    let (gt, cand) = generate(&scfg).map_err(anyhow::Error::from)?;
    write_text(&a.out_gt, &format_detections(&gt, BoxKind::GroundTruth))?;
    write_text(&a.out_cand, &format_detections(&cand, BoxKind::Scored))?;
    if let Some(dir) = &a.raster_dir {
        let (w, h) = parse_size(&a.raster_size)?;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for seq in 0..scfg.n_sequences {
            for (t, frame) in render_sequence(&scfg, seq, w, h).iter().enumerate() {
                let path = dir.join(format!("{}_{t:05}.pgm", SynthConfig::sequence_id(seq)));
                save_gray(frame, &path)?;
            }
        }
    }
    Ok(())
}

fn save_gray(frame: &Tensor, path: &Path) -> Result<()> {
    let d = frame.dims();
    let pixels: Vec<u8> = frame
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(d[2] as u32, d[1] as u32, pixels).expect("buffer matches dims");
    img.save(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_frames_dir(dir: &Path) -> Result<Vec<Tensor>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                Some("pgm" | "png")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(anyhow!("no .pgm or .png frames in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let img = image::open(p)
                .with_context(|| format!("reading {}", p.display()))?
                .to_luma8();
            let (w, h) = img.dimensions();
            let data = img.pixels().map(|px| f64::from(px.0[0]) / 255.0).collect();
            Ok(Tensor::new(vec![1, h as usize, w as usize], data).map_err(anyhow::Error::from)?)
        })
        .collect()
}

/// Feature summary printed by `temporal-demo`.
pub fn temporal_summary_text(model: &TemporalModel, frames: &[Tensor], k: usize) -> anyhow::Result<String> {
    let outputs = model.run(frames, k)?;
    let mut s = format!(
        "# frames {} k {} channels {}\nframe\tstage\tchannel\tmean\tmax\n",
        frames.len(),
        k,
        model.gtconv.out_channels()
    );
    let mut worst: f64 = 0.0;
    for (t, out) in outputs.iter().enumerate() {
        for (stage, x) in [("gtconv", &out.features), ("hqim", &out.integrated)] {
            for (c, (mean, max)) in x.channel_stats()?.into_iter().enumerate() {
                let _ = writeln!(s, "{t}\t{stage}\t{c}\t{mean:.6}\t{max:.6}");
            }
        }
        worst = worst.max(out.features.max_abs_diff(&out.base)?);
    }
    if model.has_zero_calibration() {
        if worst > 1e-6 {
            return Err(anyhow!(
                "zero calibration but GT-Conv differs from its base convolution by {worst:e}"
            ));
        }
        let _ = writeln!(
            s,
            "# reduction invariant holds: zero calibration, GT-Conv equals base convolution (max |diff| {worst:.3e})"
        );
    }
    Ok(s)
}

fn cmd_temporal(cfg: &Config, a: &TemporalArgs) -> Result<()> {
    let k = a.k.unwrap_or(cfg.temporal.k);
    if k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let map = read_weights(&a.weights).with_context(|| format!("reading {}", a.weights.display()))?;
    let model = TemporalModel::from_weights(&map, k).map_err(anyhow::Error::from)?;
    let frames = if a.frames == "synthetic" {
        let (w, h) = parse_size(&a.size)?;
        let scfg = SynthConfig {
            n_frames: a.n_frames,
            n_sequences: 1,
            ..cfg.synth.clone()
        };
        scfg.validate().map_err(|e| usage(e.to_string()))?;
        render_sequence(&scfg, 0, w, h)
    } else {
        load_frames_dir(Path::new(&a.frames))?
    };
    if let Some(f) = frames.first() {
        if f.dims()[0] != model.gtconv.in_channels() {
            return Err(CliError::Data(anyhow!(
                "frames have {} channels, weights expect {}",
                f.dims()[0],
                model.gtconv.in_channels()
            )));
        }
    }
    let text = temporal_summary_text(&model, &frames, k)?;
    emit(a.out.as_deref(), &text)
}

fn cmd_init(cfg: &Config, a: &InitArgs) -> Result<()> {
    let dims = ModelDims {
        in_channels: a.in_channels,
        channels: a.channels,
        summary_channels: a.summary_channels,
        kernel: a.kernel,
        k: a.k.unwrap_or(cfg.temporal.k),
    };
    if dims.k == 0 || dims.in_channels == 0 || dims.summary_channels == 0 {
        return Err(usage("--k, --in-channels and --summary-channels must be at least 1"));
    }
    if dims.channels == 0 || !dims.channels.is_multiple_of(2) {
        return Err(usage("--channels must be a positive even number"));
    }
    if dims.kernel.is_multiple_of(2) {
        return Err(usage("--kernel must be odd"));
    }
    let model = if a.zero {
        TemporalModel::zero(dims)
    } else {
        TemporalModel::seeded(dims, a.seed, a.zero_calibration)
    }
    .map_err(anyhow::Error::from)?;
    write_weights(&model.to_weights(), &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

/// Parses a comma-separated delta list, dropping duplicates with a warning.
pub fn parse_deltas(s: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut dups = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let d: f64 = tok
            .parse()
            .map_err(|_| usage(format!("bad delta {tok:?}")))?;
        // canonical 1e-9 grid so 0.8 and 0.80 collapse
        if seen.insert((d * 1e9).round() as i64) {
            out.push(d);
        } else {
            dups.push(d);
        }
    }
    if out.is_empty() {
        return Err(usage("--deltas must list at least one value"));
    }
    Ok((out, dups))
}

/// Sweep table and one full report per delta.
pub fn sweep_delta(
    cand: &SequenceDataset,
    gt: &SequenceDataset,
    theta: f64,
    nms_iou: f64,
    deltas: &[f64],
    ecfg: &EvalConfig,
) -> Result<(String, Vec<(f64, String)>)> {
    let params: Vec<PacParams> = deltas
        .iter()
        .map(|&d| PacParams::new(theta, d, nms_iou).map_err(|e| usage(e.to_string())))
        .collect::<Result<_>>()?;
    let mut table = String::from("delta\tAP_0.5-0.75\tAP_0.5\tAP_0.75\tAP_m\tAP_l\n");
    let mut reports = Vec::new();
    for p in &params {
        let processed = postprocess_with(cand, Method::Pac, p, None)?;
        let pairs = pair_frames(&processed, gt).map_err(anyhow::Error::from)?;
        let report = evaluate_pairs(&pairs, ecfg).map_err(anyhow::Error::from)?;
        let cols: Vec<String> = report
            .sweep_columns()
            .iter()
            .map(|c| c.map_or_else(|| "nan".into(), |v| format!("{v:.6}")))
            .collect();
        let _ = writeln!(table, "{:.2}\t{}", p.delta(), cols.join("\t"));
        reports.push((p.delta(), eval_report(&processed, gt, ecfg, false)?));
    }
    Ok((table, reports))
}

fn cmd_sweep(cfg: &Config, a: &SweepArgs) -> Result<()> {
    let (deltas, dups) = parse_deltas(&a.deltas)?;
    for d in dups {
        eprintln!("warning: duplicate delta {d} ignored");
    }
    let ecfg = eval_config(cfg, &a.eval)?;
    let theta = a.theta.unwrap_or(cfg.pac.theta);
    let nms_iou = a.nms_iou.unwrap_or(cfg.pac.nms_iou);
    let cand = read_dets(&a.input, BoxKind::Scored)?;
    let gt = read_dets(&a.gt, BoxKind::GroundTruth)?;
    let (table, reports) = sweep_delta(&cand, &gt, theta, nms_iou, &deltas, &ecfg)?;
    if let Some(dir) = &a.report_dir {
        for (d, text) in &reports {
            write_text(&dir.join(format!("report_delta_{d:.2}.tsv")), text)?;
        }
    }
    emit(a.out.as_deref(), &table)
}

/// Caps rayon's pool at `TSDETECT_THREADS` when set to a positive number.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("TSDETECT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| usage(format!("TSDETECT_THREADS={v:?} is not a non-negative integer")))?;
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    configure_threads()?;
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Postprocess(a) => cmd_postprocess(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
        Command::TemporalDemo(a) => cmd_temporal(&cfg, a),
        Command::InitWeights(a) => cmd_init(&cfg, a),
        Command::SweepDelta(a) => cmd_sweep(&cfg, a),
    }
}
