//! Single-threaded per-frame latency of the architectures.
//!
//! Every repeat runs `warmup` untimed passes of each model, then `iters`
//! timed rounds. Models are interleaved within a round, so slow drifts of
//! the host (frequency scaling, noisy neighbours) hit all of them alike.

use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use rppg_core::model::{build_model, forward, Arch, ModelSpec, WeightSet, WindowInput};
use rppg_core::rng;
use rppg_core::tensor::Tensor;

use crate::error::invalid;

pub const BENCH_SCHEMA_VERSION: u32 = 1;
pub const MIN_ITERS: usize = 30;
pub const MIN_WARMUP: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchModel {
    Can2d,
    Can3d,
    Hybrid,
    Tscan,
    Mtts,
}

impl BenchModel {
    pub const ALL: [BenchModel; 5] = [
        Self::Mtts,
        Self::Tscan,
        Self::Can2d,
        Self::Hybrid,
        Self::Can3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Can2d => "can2d",
            Self::Can3d => "can3d",
            Self::Hybrid => "hybrid",
            Self::Tscan => "tscan",
            Self::Mtts => "mtts",
        }
    }

    fn arch(self) -> Arch {
        match self {
            Self::Can2d => Arch::Can2d,
            Self::Can3d => Arch::Can3d,
            Self::Hybrid => Arch::Hybrid,
            Self::Tscan | Self::Mtts => Arch::Tscan,
        }
    }
}

impl FromStr for BenchModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!("unknown model `{s}` (expected can2d, can3d, hybrid, tscan or mtts)")
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub models: Vec<BenchModel>,
    pub iters: usize,
    pub warmup: usize,
    pub repeats: usize,
    pub window_len: usize,
    pub input_size: usize,
    pub filters: [usize; 4],
    pub hidden: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let base = ModelSpec::new(Arch::Tscan);
        Self {
            models: BenchModel::ALL.to_vec(),
            iters: MIN_ITERS,
            warmup: MIN_WARMUP,
            repeats: 1,
            window_len: base.window_len,
            input_size: base.input_size,
            filters: base.filters,
            hidden: base.hidden,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.iters < MIN_ITERS {
            return Err(invalid(format!(
                "iters {} below the minimum of {MIN_ITERS}",
                self.iters
            )));
        }
        if self.warmup < MIN_WARMUP {
            return Err(invalid(format!(
                "warmup {} below the minimum of {MIN_WARMUP}",
                self.warmup
            )));
        }
        if self.repeats == 0 || self.models.is_empty() {
            return Err(invalid("need at least one model and one repeat"));
        }
        Ok(())
    }

    fn spec(&self, arch: Arch, multi_task: bool) -> ModelSpec {
        ModelSpec {
            window_len: self.window_len,
            input_size: self.input_size,
            filters: self.filters,
            hidden: self.hidden,
            ..ModelSpec::new(arch).multi_task(multi_task)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelLatency {
    pub model: BenchModel,
    /// Forward passes per timed sample: single-task models run one pass
    /// per head to produce both pulse and respiration.
    pub passes: usize,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
    pub window_median_ms: f64,
    /// Per-frame median of each repeat.
    pub repeat_medians_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub host: String,
    pub threads: usize,
    pub window_len: usize,
    pub warmup: usize,
    pub iters: usize,
    pub repeats: usize,
    pub models: Vec<ModelLatency>,
}

impl BenchReport {
    pub fn get(&self, m: BenchModel) -> Option<&ModelLatency> {
        self.models.iter().find(|l| l.model == m)
    }

    /// Repeats in which `fast` had a strictly lower median than `slow`.
    pub fn wins(&self, fast: BenchModel, slow: BenchModel) -> usize {
        match (self.get(fast), self.get(slow)) {
            (Some(a), Some(b)) => a
                .repeat_medians_ms
                .iter()
                .zip(&b.repeat_medians_ms)
                .filter(|(x, y)| x < y)
                .count(),
            _ => 0,
        }
    }
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

pub fn host_descriptor() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{} {} / {cpu} / {cores} logical cpus",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

struct Runner {
    model: BenchModel,
    spec: ModelSpec,
    /// One weight set per forward pass of a sample.
    weights: Vec<WeightSet<f32>>,
    input: WindowInput<f32>,
}

impl Runner {
    fn run(&self) -> anyhow::Result<()> {
        for w in &self.weights {
            black_box(forward(&self.spec, w, black_box(&self.input), false, 0)?);
        }
        Ok(())
    }
}

pub fn run_bench(cfg: &BenchConfig) -> anyhow::Result<BenchReport> {
    cfg.validate()?;
    let s = cfg.input_size;
    let mut r = rng::seeded(rng::derive_seed(cfg.seed, 1));
    let dims = [cfg.window_len, s, s, 3];
    let motion = Tensor::from_fn(&dims, |_| rng::uniform(&mut r, -1.0, 1.0) as f32);
    let raw = Tensor::from_fn(&dims, |_| rng::uniform(&mut r, -1.0, 1.0) as f32);

    let mut runners = Vec::new();
    for (i, &m) in cfg.models.iter().enumerate() {
        let spec = cfg.spec(m.arch(), m == BenchModel::Mtts);
        spec.validate().map_err(crate::error::classify_core)?;
        let passes = if m == BenchModel::Mtts { 1 } else { 2 };
        let weights = (0..passes)
            .map(|p| build_model(&spec, rng::derive_seed(cfg.seed, 100 + 10 * i as u64 + p)))
            .collect::<rppg_core::Result<Vec<_>>>()?;
        let input = WindowInput::from_frames(spec.arch, motion.clone(), &raw);
        runners.push(Runner {
            model: m,
            spec,
            weights,
            input,
        });
    }

    let mut all: Vec<Vec<f64>> = vec![Vec::new(); runners.len()];
    let mut medians: Vec<Vec<f64>> = vec![Vec::new(); runners.len()];
    for _ in 0..cfg.repeats {
        for _ in 0..cfg.warmup {
            for run in &runners {
                run.run()?;
            }
        }
        let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.iters); runners.len()];
        for _ in 0..cfg.iters {
            for (k, run) in runners.iter().enumerate() {
                let t0 = Instant::now();
                run.run()?;
                samples[k].push(t0.elapsed().as_secs_f64() * 1e3);
            }
        }
        for (k, s) in samples.into_iter().enumerate() {
            medians[k].push(quantile(&sorted(s.clone()), 0.5) / cfg.window_len as f64);
            all[k].extend(s);
        }
    }

    let models = runners
        .iter()
        .zip(all.into_iter().zip(medians))
        .map(|(run, (window_ms, repeat_medians_ms))| {
            let w = sorted(window_ms);
            let per_frame = |q: f64| quantile(&w, q) / cfg.window_len as f64;
            ModelLatency {
                model: run.model,
                passes: run.weights.len(),
                median_ms: per_frame(0.5),
                p10_ms: per_frame(0.1),
                p90_ms: per_frame(0.9),
                window_median_ms: quantile(&w, 0.5),
                repeat_medians_ms,
            }
        })
        .collect();
    Ok(BenchReport {
        schema_version: BENCH_SCHEMA_VERSION,
        host: host_descriptor(),
        threads: 1,
        window_len: cfg.window_len,
        warmup: cfg.warmup,
        iters: cfg.iters,
        repeats: cfg.repeats,
        models,
    })
}
