//! Unsupervised pulse extraction from spatially averaged RGB traces:
//! CHROM, POS and ICA.

use std::path::Path;

use rppg_core::tensor::{Tensor, VideoClip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{butter_bandpass_sos, sosfiltfilt};
use crate::jade::{jade, JadeConfig};
use crate::preprocess::channel_means;
use crate::spectrum::periodogram;
use crate::trace::{rate_from_timestamps, BandSpec, SignalTrace};

/// Sliding-window length shared by CHROM and POS.
pub const WINDOW_S: f64 = 1.6;

/// Band used by CHROM's filter and ICA's component selection.
pub const CLASSICAL_BAND: BandSpec = BandSpec { lo: 0.7, hi: 2.5 };

#[derive(Clone, Debug, PartialEq)]
pub struct RgbTraces {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub b: Vec<f64>,
    pub fs: f64,
}

impl RgbTraces {
    pub fn new(r: Vec<f64>, g: Vec<f64>, b: Vec<f64>, fs: f64) -> Result<Self> {
        if r.len() != g.len() || r.len() != b.len() {
            return Err(Error::invalid(
                "rgb traces",
                format!(
                    "channel lengths differ: {}, {}, {}",
                    r.len(),
                    g.len(),
                    b.len()
                ),
            ));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::invalid(
                "rgb traces",
                format!("sampling rate {fs} must be positive"),
            ));
        }
        if r.iter().chain(&g).chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("rgb traces", "non-finite sample"));
        }
        Ok(Self { r, g, b, fs })
    }

    /// Mask-weighted spatial means of every frame.
    pub fn from_clip(clip: &VideoClip, mask: Option<&Tensor<f32>>) -> Result<Self> {
        let [r, g, b] = channel_means(clip, mask)?;
        Self::new(r, g, b, clip.fps)
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * k).collect();
        Self {
            r: s(&self.r),
            g: s(&self.g),
            b: s(&self.b),
            fs: self.fs,
        }
    }

    /// Reads `t_s,r,g,b` rows.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_s", "r", "g", "b"] {
            return Err(Error::invalid(
                "rgb csv",
                format!("expected header `t_s,r,g,b`, got {headers:?}"),
            ));
        }
        let (mut t, mut r, mut g, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let (ts, rv, gv, bv): (f64, f64, f64, f64) = row?;
            t.push(ts);
            r.push(rv);
            g.push(gv);
            b.push(bv);
        }
        Self::new(r, g, b, rate_from_timestamps(&t)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_s", "r", "g", "b"])?;
        for i in 0..self.len() {
            w.serialize((i as f64 / self.fs, self.r[i], self.g[i], self.b[i]))?;
        }
        w.flush()?;
        Ok(())
    }

    fn window_len(&self, op: &'static str, min_s: f64) -> Result<usize> {
        let need = (min_s * self.fs).round() as usize;
        if self.len() < need {
            return Err(Error::TooShort {
                op,
                need,
                got: self.len(),
            });
        }
        Ok(need)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Diagnostics shared by the three extractors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub windows: usize,
    /// Windows that contributed nothing because a normalizer was zero.
    pub skipped_windows: usize,
    /// ICA only: number of separated sources.
    pub sources: Option<usize>,
    pub sweeps: Option<usize>,
    pub converged: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub bvp: SignalTrace,
    pub diagnostics: Diagnostics,
}

/// Chrominance method over 1.6 s windows with 50% overlap. Each window is
/// divided by its channel means, band-passed (3rd-order Butterworth,
/// zero-phase), combined as `S = A − αB` with `α = σ(A)/σ(B)`, Hann
/// weighted and overlap-added. A trailing partial window is dropped.
pub fn chrom(traces: &RgbTraces) -> Result<Extraction> {
    let mut l = traces.window_len("chrom", WINDOW_S)?;
    l += l % 2;
    let step = l / 2;
    let sos = butter_bandpass_sos(3, CLASSICAL_BAND, traces.fs)?;
    let hann: Vec<f64> = (0..l)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (l - 1) as f64).cos())
        .collect();
    let mut out = vec![0.0; traces.len()];
    let mut diag = Diagnostics::default();
    let mut start = 0;
    while start + l <= traces.len() {
        diag.windows += 1;
        let seg = start..start + l;
        let norm = |x: &[f64]| -> Result<Option<Vec<f64>>> {
            let m = mean(x);
            if m == 0.0 {
                return Ok(None);
            }
            let y: Vec<f64> = x.iter().map(|v| v / m).collect();
            Ok(Some(sosfiltfilt(&sos, &y)?))
        };
        let (Some(yr), Some(yg), Some(yb)) = (
            norm(&traces.r[seg.clone()])?,
            norm(&traces.g[seg.clone()])?,
            norm(&traces.b[seg.clone()])?,
        ) else {
            diag.skipped_windows += 1;
            start += step;
            continue;
        };
        let a: Vec<f64> = (0..l).map(|i| 3.0 * yr[i] - 2.0 * yg[i]).collect();
        let b: Vec<f64> = (0..l).map(|i| 1.5 * yr[i] + yg[i] - 1.5 * yb[i]).collect();
        let sb = std_dev(&b);
        let alpha = if sb > 0.0 { std_dev(&a) / sb } else { 0.0 };
        for i in 0..l {
            out[start + i] += hann[i] * (a[i] - alpha * b[i]);
        }
        start += step;
    }
    Ok(Extraction {
        bvp: SignalTrace::new(out, traces.fs)?,
        diagnostics: diag,
    })
}

/// Plane-orthogonal-to-skin over 1.6 s windows advanced one frame at a
/// time: `h = X + (σX/σY)·Y`, `X = g − b`, `Y = −2r + g + b` on
/// mean-normalized channels, overlap-added after mean removal. Windows with
/// `σY = 0` are skipped.
pub fn pos(traces: &RgbTraces) -> Result<Extraction> {
    let l = traces.window_len("pos", WINDOW_S)?;
    let mut out = vec![0.0; traces.len()];
    let mut diag = Diagnostics::default();
    let mut x = vec![0.0; l];
    let mut y = vec![0.0; l];
    for start in 0..=traces.len() - l {
        diag.windows += 1;
        let seg = start..start + l;
        let (mr, mg, mb) = (
            mean(&traces.r[seg.clone()]),
            mean(&traces.g[seg.clone()]),
            mean(&traces.b[seg.clone()]),
        );
        if mr == 0.0 || mg == 0.0 || mb == 0.0 {
            diag.skipped_windows += 1;
            continue;
        }
        for i in 0..l {
            let (r, g, b) = (
                traces.r[start + i] / mr,
                traces.g[start + i] / mg,
                traces.b[start + i] / mb,
            );
            x[i] = g - b;
            y[i] = -2.0 * r + g + b;
        }
        let sy = std_dev(&y);
        if !(sy > 1e-12) {
            diag.skipped_windows += 1;
            continue;
        }
        let ratio = std_dev(&x) / sy;
        let h: Vec<f64> = (0..l).map(|i| x[i] + ratio * y[i]).collect();
        let mh = mean(&h);
        for i in 0..l {
            out[start + i] += h[i] - mh;
        }
    }
    Ok(Extraction {
        bvp: SignalTrace::new(out, traces.fs)?,
        diagnostics: diag,
    })
}

/// Least-squares line removed from `x`.
pub fn detrend(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let xm = mean(x);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - tm;
        sxy += dt * (v - xm);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .enumerate()
        .map(|(i, v)| v - xm - slope * (i as f64 - tm))
        .collect()
}

fn zscore(x: &[f64]) -> Vec<f64> {
    let m = mean(x);
    let s = std_dev(x);
    if s > 0.0 {
        x.iter().map(|v| (v - m) / s).collect()
    } else {
        vec![0.0; x.len()]
    }
}

/// Fraction of periodogram power inside `band`.
pub fn band_power_ratio(x: &[f64], fs: f64, band: BandSpec) -> f64 {
    let spec = periodogram(x, fs);
    let total: f64 = spec.power.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let inside: f64 = spec
        .freqs
        .iter()
        .zip(&spec.power)
        .filter(|(f, _)| **f >= band.lo && **f <= band.hi)
        .map(|(_, p)| p)
        .sum();
    inside / total
}

/// ICA over detrended, z-scored channels; returns the separated component
/// with the largest share of power in 0.7–2.5 Hz. Two identical channels
/// reduce the separation to two sources.
pub fn ica_pulse(traces: &RgbTraces) -> Result<Extraction> {
    traces.window_len("ica", 10.0)?;
    let rows: Vec<Vec<f64>> = [&traces.r, &traces.g, &traces.b]
        .iter()
        .map(|c| zscore(&detrend(c)))
        .collect();
    let sep = jade(&rows, &JadeConfig::default())?;
    let best = sep
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| (i, band_power_ratio(s, traces.fs, CLASSICAL_BAND)))
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, r)| if r > acc.1 { (i, r) } else { acc },
        )
        .0;
    Ok(Extraction {
        bvp: SignalTrace::new(sep.sources[best].clone(), traces.fs)?,
        diagnostics: Diagnostics {
            windows: 1,
            skipped_windows: 0,
            sources: Some(sep.sources.len()),
            sweeps: Some(sep.sweeps),
            converged: Some(sep.converged),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pos,
    Chrom,
    Ica,
}

impl Method {
    pub fn run(self, traces: &RgbTraces) -> Result<Extraction> {
        match self {
            Method::Pos => pos(traces),
            Method::Chrom => chrom(traces),
            Method::Ica => ica_pulse(traces),
        }
    }
}
