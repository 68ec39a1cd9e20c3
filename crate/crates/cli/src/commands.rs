//! The `rppg` verbs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rppg_core::model::{build_model, ModelSpec, WeightSet};
use rppg_core::rng;
use rppg_core::train::{load_dataset, save_dataset, train, Split, StoredWindow, TrainConfig};
use rppg_dsp::classical::{Method, RgbTraces};
use rppg_dsp::metrics::{bland_altman, evaluate};
use rppg_dsp::spectrum::estimate_rate;
use rppg_dsp::{SignalKind, SignalTrace};
use rppg_synth::dataset::clip_windows;
use rppg_synth::io::{export_rgb24, load_frames, save_clip};
use rppg_synth::{render_clip, SynthParams};

use crate::bench::{run_bench, BenchConfig, BenchModel};
use crate::error::{classify_core, classify_synth, invalid};
use crate::pipeline::predict_clip;

/// Version of every JSON summary the commands write.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rppg",
    version,
    about = "Camera-based pulse and respiration measurement"
)]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic clips with ground truth.
    Synth(SynthArgs),
    /// Run a model over a clip and write the predicted waveforms.
    Infer(InferArgs),
    /// Train a model on a window dataset.
    Train(TrainArgs),
    /// Compare a predicted waveform with a reference.
    Eval(EvalArgs),
    /// Extract a pulse with a classical method.
    Baseline(BaselineArgs),
    /// Time the forward pass of each architecture.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON clip parameters: one object or an array of objects.
    #[arg(long)]
    pub config: PathBuf,
    /// Also write raw RGB24 frames next to each clip.
    #[arg(long)]
    pub rgb24: bool,
    /// Also cut the clips into a training dataset in this directory.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub window_len: usize,
    #[arg(long, default_value_t = 36)]
    pub input_size: usize,
    /// Mark the windows of the last N clips as the test split.
    #[arg(long, default_value_t = 0)]
    pub holdout: usize,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub clip: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory containing `manifest.json`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Pulse,
    Resp,
}

impl From<KindArg> for SignalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Pulse => SignalKind::Pulse,
            KindArg::Resp => SignalKind::Resp,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_enum, default_value = "pulse")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 30.0)]
    pub window_s: f64,
    /// Also draw the Bland-Altman scatter as SVG.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Pos,
    Chrom,
    Ica,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub method: MethodArg,
    /// VTF clip; its `mask` record, if any, selects the skin pixels.
    #[arg(long, conflicts_with = "rgb", required_unless_present = "rgb")]
    pub clip: Option<PathBuf>,
    /// CSV of per-frame channel means (`t_s,r,g,b`).
    #[arg(long)]
    pub rgb: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated subset of can2d, can3d, hybrid, tscan, mtts.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "mtts,tscan,can2d,hybrid,can3d"
    )]
    pub models: Vec<BenchModel>,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub window_len: usize,
    /// JSON model spec supplying input size, filters and hidden width.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, cli.seed, out).map(|_| ()),
        Command::Infer(a) => cmd_infer(&a, out).map(|_| ()),
        Command::Train(a) => cmd_train(&a, cli.seed.unwrap_or(0), out).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a, out).map(|_| ()),
        Command::Baseline(a) => cmd_baseline(&a, out).map(|_| ()),
        Command::Bench(a) => cmd_bench(&a, cli.seed.unwrap_or(0), out).map(|_| ()),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn load_spec(path: &Path) -> anyhow::Result<ModelSpec> {
    let text = read_text(path)?;
    ModelSpec::from_json(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClipEntry {
    pub file: String,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub seed: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthManifest {
    pub schema_version: u32,
    pub clips: Vec<ClipEntry>,
}

/// Parses one `SynthParams` object or an array of them. Each entry is
/// validated separately so the error names the offending clip and field.
pub fn parse_synth_config(text: &str) -> anyhow::Result<Vec<SynthParams>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
    let items = match value {
        serde_json::Value::Array(v) => v,
        v => vec![v],
    };
    if items.is_empty() {
        return Err(invalid("config: no clips"));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let p: SynthParams =
                serde_json::from_value(v).map_err(|e| invalid(format!("config clip {i}: {e}")))?;
            p.validate()
                .map_err(|e| invalid(format!("config clip {i}: {e}")))?;
            Ok(p)
        })
        .collect()
}

pub fn cmd_synth(a: &SynthArgs, seed: Option<u64>, out: &Path) -> anyhow::Result<SynthManifest> {
    let mut clips = parse_synth_config(&read_text(&a.config)?)?;
    if let Some(s) = seed {
        for (i, p) in clips.iter_mut().enumerate() {
            p.seed = s.wrapping_add(i as u64);
        }
    }
    if a.holdout > clips.len() {
        return Err(invalid(format!(
            "holdout {} exceeds {} clips",
            a.holdout,
            clips.len()
        )));
    }
    fs::create_dir_all(out)?;
    let mut entries = Vec::with_capacity(clips.len());
    let mut windows: Vec<(StoredWindow, Split)> = Vec::new();
    for (i, p) in clips.iter().enumerate() {
        let r = render_clip(p).map_err(classify_synth)?;
        let stem = format!("clip_{i:03}");
        let file = format!("{stem}.vtf");
        let path = out.join(&file);
        save_clip(&path, &r, p)?;
        r.truth
            .bvp_trace()?
            .write_csv(out.join(format!("{stem}_bvp.csv")))?;
        r.truth
            .resp_trace()?
            .write_csv(out.join(format!("{stem}_resp.csv")))?;
        if a.rgb24 {
            export_rgb24(&r.clip, out.join(format!("{stem}.rgb")))?;
        }
        if a.dataset.is_some() {
            let split = if i + a.holdout >= clips.len() {
                Split::Test
            } else {
                Split::Train
            };
            let w = clip_windows(&r, a.window_len, a.input_size).map_err(classify_synth)?;
            windows.extend(w.into_iter().map(|w| (w, split)));
        }
        entries.push(ClipEntry {
            sha256: sha256_file(&path)?,
            file,
            frames: r.clip.num_frames(),
            height: p.height,
            width: p.width,
            fps: p.fps,
            seed: p.seed,
        });
    }
    if let Some(dir) = &a.dataset {
        save_dataset(dir, &windows)?;
    }
    let manifest = SynthManifest {
        schema_version: REPORT_SCHEMA_VERSION,
        clips: entries,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InferSummary {
    pub schema_version: u32,
    pub frames: usize,
    pub windows: usize,
    /// Difference frames after the last full window, not predicted.
    pub dropped_frames: usize,
    pub samples: usize,
    pub outputs: Vec<String>,
}

pub fn cmd_infer(a: &InferArgs, out: &Path) -> anyhow::Result<InferSummary> {
    let spec = load_spec(&a.model)?;
    let weights = WeightSet::load(&a.weights, &spec).map_err(classify_core)?;
    let (clip, _) = load_frames(&a.clip)?;
    let pred = predict_clip(&spec, &weights, &clip)?;
    fs::create_dir_all(out)?;
    let mut outputs = vec!["bvp.csv".to_string()];
    pred.bvp.write_csv(out.join("bvp.csv"))?;
    if let Some(r) = &pred.resp {
        r.write_csv(out.join("resp.csv"))?;
        outputs.push("resp.csv".into());
    }
    let summary = InferSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        frames: clip.num_frames(),
        windows: pred.windows,
        dropped_frames: pred.dropped_frames,
        samples: pred.bvp.len(),
        outputs,
    };
    if summary.dropped_frames > 0 {
        eprintln!(
            "warning: {} trailing difference frames dropped",
            summary.dropped_frames
        );
    }
    write_json(&out.join("infer.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub schema_version: u32,
    pub epochs: usize,
    pub windows: usize,
    pub seed: u64,
    pub first_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

pub fn cmd_train(a: &TrainArgs, seed: u64, out: &Path) -> anyhow::Result<TrainSummary> {
    let spec = load_spec(&a.model)?;
    let (manifest, windows) = load_dataset(&a.data, Split::Train)?;
    if manifest.window_len != spec.window_len || manifest.input_size != spec.input_size {
        return Err(invalid(format!(
            "dataset windows are {}×{}px but the model expects {}×{}px",
            manifest.window_len, manifest.input_size, spec.window_len, spec.input_size
        )));
    }
    if windows.is_empty() {
        return Err(invalid("dataset has no training windows"));
    }
    let data: Vec<_> = windows.iter().map(|w| w.to_sample(&spec)).collect();
    let initial = build_model(&spec, seed).map_err(classify_core)?;
    let cfg = TrainConfig {
        batch_size: a.batch_size,
        ..TrainConfig::new(a.epochs, rng::derive_seed(seed, 1))
    };
    let result = train(&spec, initial, &data, &cfg, |e, l| {
        eprintln!("epoch {e}: loss {l:.6}")
    })
    .map_err(classify_core)?;
    fs::create_dir_all(out)?;
    result.weights.save(out.join("weights.vtf"))?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in result.loss_history.iter().enumerate() {
        csv.push_str(&format!("{e},{l}\n"));
    }
    fs::write(out.join("loss.csv"), csv)?;
    let summary = TrainSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        epochs: a.epochs,
        windows: data.len(),
        seed,
        first_loss: result.loss_history.first().copied(),
        final_loss: result.loss_history.last().copied(),
    };
    write_json(&out.join("train.json"), &summary)?;
    Ok(summary)
}

fn scatter_svg(points: &[(f64, f64)], bias: f64, limits: (f64, f64)) -> String {
    let (w, h, m) = (480.0, 360.0, 40.0);
    let xs = points.iter().map(|p| p.0);
    let ys = points.iter().map(|p| p.1).chain([limits.0, limits.1]);
    let (x0, x1) = xs.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let (y0, y1) = ys.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let px = |x: f64| m + (x - x0) / span(x0, x1) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / span(y0, y1) * (h - 2.0 * m);
    let mut s =
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
    for (y, dash) in [
        (bias, ""),
        (limits.0, " stroke-dasharray=\"4 3\""),
        (limits.1, " stroke-dasharray=\"4 3\""),
    ] {
        s += &format!(
            "<line x1=\"{m}\" x2=\"{}\" y1=\"{1:.2}\" y2=\"{1:.2}\" stroke=\"gray\"{dash}/>\n",
            w - m,
            py(y)
        );
    }
    for &(x, y) in points {
        s += &format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>\n",
            px(x),
            py(y)
        );
    }
    s += &format!(
        "<text x=\"{m}\" y=\"{}\" font-size=\"12\">mean rate</text>\n",
        h - 10.0
    );
    s += "<text x=\"4\" y=\"20\" font-size=\"12\">difference</text>\n</svg>\n";
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub schema_version: u32,
    pub metrics: rppg_dsp::metrics::MetricsReport,
    pub bias: f64,
    pub limits: (f64, f64),
}

pub fn cmd_eval(a: &EvalArgs, out: &Path) -> anyhow::Result<EvalSummary> {
    let pred = SignalTrace::read_csv(&a.pred)
        .map_err(|e| invalid(format!("{}: {e}", a.pred.display())))?;
    let truth = SignalTrace::read_csv(&a.truth)
        .map_err(|e| invalid(format!("{}: {e}", a.truth.display())))?;
    if (pred.fs - truth.fs).abs() > 1e-6 * truth.fs {
        return Err(invalid(format!(
            "sample rates differ: {} vs {} Hz",
            pred.fs, truth.fs
        )));
    }
    let n = pred.len().min(truth.len());
    let win = (a.window_s * truth.fs).round() as usize;
    if !(a.window_s > 0.0) || n < win {
        return Err(invalid(format!(
            "{n} common samples do not fill one {} s window at {} Hz",
            a.window_s, truth.fs
        )));
    }
    let pred = pred.slice(0, n);
    let truth = SignalTrace::new(truth.samples[..n].to_vec(), pred.fs)?;
    let report = evaluate(&pred, &truth, a.kind.into(), a.window_s)?;
    let est: Vec<f64> = report.windows.iter().map(|w| w.estimated).collect();
    let reference: Vec<f64> = report.windows.iter().map(|w| w.reference).collect();
    let ba = bland_altman(&est, &reference)?;
    fs::create_dir_all(out)?;
    report.write_json(out.join("metrics.json"))?;
    report.write_csv(out.join("metrics.csv"))?;
    let mut csv = String::from("mean_rate,diff_rate\n");
    for (m, d) in &ba.points {
        csv.push_str(&format!("{m},{d}\n"));
    }
    fs::write(out.join("bland_altman.csv"), csv)?;
    if a.svg {
        fs::write(
            out.join("bland_altman.svg"),
            scatter_svg(&ba.points, ba.bias, ba.limits),
        )?;
    }
    Ok(EvalSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        metrics: report,
        bias: ba.bias,
        limits: ba.limits,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub schema_version: u32,
    pub method: String,
    pub diagnostics: rppg_dsp::classical::Diagnostics,
    pub hr_bpm: Option<f64>,
    pub low_confidence: Option<bool>,
}

pub fn cmd_baseline(a: &BaselineArgs, out: &Path) -> anyhow::Result<BaselineSummary> {
    let traces = match (&a.clip, &a.rgb) {
        (Some(c), _) => {
            let (clip, mask) = load_frames(c)?;
            RgbTraces::from_clip(&clip, mask.as_ref())?
        }
        (None, Some(p)) => {
            RgbTraces::read_csv(p).map_err(|e| invalid(format!("{}: {e}", p.display())))?
        }
        (None, None) => return Err(invalid("need --clip or --rgb")),
    };
    let (method, name) = match a.method {
        MethodArg::Pos => (Method::Pos, "pos"),
        MethodArg::Chrom => (Method::Chrom, "chrom"),
        MethodArg::Ica => (Method::Ica, "ica"),
    };
    let ext = method.run(&traces)?;
    fs::create_dir_all(out)?;
    ext.bvp.write_csv(out.join("bvp.csv"))?;
    let rate = estimate_rate(&ext.bvp, SignalKind::Pulse.band()).ok();
    let summary = BaselineSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        method: name.into(),
        diagnostics: ext.diagnostics,
        hr_bpm: rate.as_ref().map(|r| r.rate),
        low_confidence: rate.map(|r| r.low_confidence),
    };
    write_json(&out.join("baseline.json"), &summary)?;
    Ok(summary)
}

pub fn cmd_bench(
    a: &BenchArgs,
    seed: u64,
    out: &Path,
) -> anyhow::Result<crate::bench::BenchReport> {
    let mut cfg = BenchConfig {
        models: a.models.clone(),
        iters: a.iters,
        warmup: a.warmup,
        repeats: a.repeats,
        window_len: a.window_len,
        seed,
        ..BenchConfig::default()
    };
    if let Some(p) = &a.model {
        let spec = load_spec(p)?;
        cfg.input_size = spec.input_size;
        cfg.filters = spec.filters;
        cfg.hidden = spec.hidden;
    }
    let report = run_bench(&cfg)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("bench.json"), &report)?;
    for m in &report.models {
        println!(
            "{:<7} median {:>8.3} ms/frame  p10 {:>8.3}  p90 {:>8.3}",
            m.model.name(),
            m.median_ms,
            m.p10_ms,
            m.p90_ms
        );
    }
    Ok(report)
}
