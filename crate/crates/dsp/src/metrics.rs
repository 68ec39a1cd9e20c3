//! Rate-error metrics and windowed evaluation reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::butter_bandpass;
use crate::spectrum::{estimate_rate, snr};
use crate::trace::{SignalKind, SignalTrace};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

fn check_pair(est: &[f64], reference: &[f64]) -> Result<()> {
    if est.is_empty() || est.len() != reference.len() {
        return Err(Error::invalid(
            "metrics",
            format!(
                "need equal nonempty lengths, got {} and {}",
                est.len(),
                reference.len()
            ),
        ));
    }
    Ok(())
}

pub fn mae(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    Ok(est
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / est.len() as f64)
}

pub fn rmse(est: &[f64], reference: &[f64]) -> Result<f64> {
    check_pair(est, reference)?;
    let mse = est
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / est.len() as f64;
    Ok(mse.sqrt())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(est: &[f64], reference: &[f64]) -> Result<Option<f64>> {
    check_pair(est, reference)?;
    let n = est.len() as f64;
    let (ma, mb) = (
        est.iter().sum::<f64>() / n,
        reference.iter().sum::<f64>() / n,
    );
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in est.iter().zip(reference) {
        let (da, db) = (a - ma, b - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowMetric {
    pub start_s: f64,
    pub estimated: f64,
    pub reference: f64,
    pub snr_db: f64,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub kind: SignalKind,
    pub window_s: f64,
    pub windows: Vec<WindowMetric>,
    pub mae: f64,
    pub rmse: f64,
    pub pearson_rho: Option<f64>,
    pub mean_snr_db: f64,
}

impl MetricsReport {
    pub fn from_windows(
        kind: SignalKind,
        window_s: f64,
        windows: Vec<WindowMetric>,
    ) -> Result<Self> {
        let est: Vec<f64> = windows.iter().map(|w| w.estimated).collect();
        let reference: Vec<f64> = windows.iter().map(|w| w.reference).collect();
        Ok(Self {
            schema_version: METRICS_SCHEMA_VERSION,
            kind,
            window_s,
            mae: mae(&est, &reference)?,
            rmse: rmse(&est, &reference)?,
            pearson_rho: pearson(&est, &reference)?,
            mean_snr_db: windows.iter().map(|w| w.snr_db).sum::<f64>() / windows.len() as f64,
            windows,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// One row per window, then an `aggregate` row carrying MAE, RMSE, ρ
    /// and mean SNR in the estimate/reference/snr columns.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "row",
            "start_s",
            "estimated",
            "reference",
            "snr_db",
            "mae",
            "rmse",
            "pearson_rho",
        ])?;
        for (i, m) in self.windows.iter().enumerate() {
            w.write_record([
                i.to_string(),
                m.start_s.to_string(),
                m.estimated.to_string(),
                m.reference.to_string(),
                m.snr_db.to_string(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        w.write_record([
            "aggregate".to_string(),
            String::new(),
            String::new(),
            String::new(),
            self.mean_snr_db.to_string(),
            self.mae.to_string(),
            self.rmse.to_string(),
            self.pearson_rho.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Splits both traces into non-overlapping windows of `window_s` seconds
/// (a trailing partial window is dropped; a trace shorter than one window
/// is used whole), band-passes each prediction window, and compares its
/// spectral rate with the reference waveform's.
pub fn evaluate(
    pred: &SignalTrace,
    reference: &SignalTrace,
    kind: SignalKind,
    window_s: f64,
) -> Result<MetricsReport> {
    if pred.len() != reference.len() || (pred.fs - reference.fs).abs() > 1e-9 {
        return Err(Error::invalid(
            "evaluate",
            format!(
                "prediction ({} samples @ {} Hz) and reference ({} @ {} Hz) differ",
                pred.len(),
                pred.fs,
                reference.len(),
                reference.fs
            ),
        ));
    }
    let win = ((window_s * pred.fs).round() as usize).min(pred.len());
    if win == 0 {
        return Err(Error::invalid("evaluate", "empty window"));
    }
    let band = kind.band();
    let mut windows = Vec::new();
    for k in 0..pred.len() / win {
        let (a, b) = (k * win, (k + 1) * win);
        let p = butter_bandpass(&pred.slice(a, b), band)?;
        let r = butter_bandpass(&reference.slice(a, b), band)?;
        let est = estimate_rate(&p, band)?;
        let truth = estimate_rate(&r, band)?;
        windows.push(WindowMetric {
            start_s: a as f64 / pred.fs,
            estimated: est.rate,
            reference: truth.rate,
            snr_db: snr(&p, truth.rate, kind)?,
            low_confidence: est.low_confidence,
        });
    }
    MetricsReport::from_windows(kind, window_s, windows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    /// `(mean, estimated − reference)` per window.
    pub points: Vec<(f64, f64)>,
    pub bias: f64,
    /// `bias ± 1.96·sd`.
    pub limits: (f64, f64),
}

pub fn bland_altman(est: &[f64], reference: &[f64]) -> Result<BlandAltman> {
    check_pair(est, reference)?;
    let points: Vec<(f64, f64)> = est
        .iter()
        .zip(reference)
        .map(|(a, b)| ((a + b) / 2.0, a - b))
        .collect();
    let n = points.len() as f64;
    let bias = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sd = if points.len() > 1 {
        (points.iter().map(|p| (p.1 - bias).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BlandAltman {
        points,
        bias,
        limits: (bias - 1.96 * sd, bias + 1.96 * sd),
    })
}
