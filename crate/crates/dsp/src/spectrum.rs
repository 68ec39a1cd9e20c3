//! Periodogram, spectral-peak rate estimation and template SNR.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trace::{BandSpec, SignalKind, SignalTrace};

/// Zero-padding factor of the periodogram.
pub const PAD_FACTOR: usize = 4;

/// SNR reported when no power falls outside the template.
pub const SNR_CAP_DB: f64 = 80.0;

/// One-sided power spectrum on a uniform frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies in Hz, `k·fs/nfft` for `k = 0..=nfft/2`.
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }
}

/// Hann-windowed periodogram with `nfft = PAD_FACTOR · n`. Power is
/// `|X_k|²`; absolute scaling cancels in every consumer.
pub fn periodogram(x: &[f64], fs: f64) -> Spectrum {
    let n = x.len();
    let nfft = (PAD_FACTOR * n).max(1);
    let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); nfft];
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    for (i, (&v, slot)) in x.iter().zip(buf.iter_mut()).enumerate() {
        let w = if n > 1 {
            0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()
        } else {
            1.0
        };
        *slot = Complex64::new((v - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let half = nfft / 2;
    Spectrum {
        freqs: (0..=half).map(|k| k as f64 * fs / nfft as f64).collect(),
        power: buf[..=half].iter().map(|c| c.norm_sqr()).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Cycles per minute.
    pub rate: f64,
    /// In-band peak power over the largest power outside the band.
    pub peak_ratio: f64,
    pub low_confidence: bool,
}

/// Rate at the periodogram maximum inside `band`. Flagged low-confidence
/// when the in-band peak is less than twice the strongest out-of-band bin
/// (DC excluded).
pub fn estimate_rate(x: &SignalTrace, band: BandSpec) -> Result<RateEstimate> {
    band.check(x.fs)?;
    let need = (2.0 / band.lo * x.fs).ceil() as usize;
    if x.len() < need {
        return Err(Error::TooShort {
            op: "estimate_rate",
            need,
            got: x.len(),
        });
    }
    let spec = periodogram(&x.samples, x.fs);
    let mut best: Option<(f64, f64)> = None;
    let mut outside = 0.0f64;
    for (&f, &p) in spec.freqs.iter().zip(&spec.power).skip(1) {
        if f >= band.lo && f <= band.hi {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((f, p));
            }
        } else {
            outside = outside.max(p);
        }
    }
    let (f, p) =
        best.ok_or_else(|| Error::invalid("estimate_rate", "no periodogram bin inside band"))?;
    let peak_ratio = if outside > 0.0 {
        p / outside
    } else {
        f64::INFINITY
    };
    Ok(RateEstimate {
        rate: 60.0 * f,
        peak_ratio,
        low_confidence: !(peak_ratio >= 2.0),
    })
}

/// Template SNR of a power spectrum in dB: power within ±6 of `ref_rate`
/// and ±12 of `2·ref_rate` (per-minute units) against the rest of `range`.
pub fn snr_from_spectrum(spec: &Spectrum, ref_rate: f64, range: (f64, f64)) -> Result<f64> {
    if !(ref_rate >= range.0 && ref_rate <= range.1) {
        return Err(Error::invalid(
            "snr",
            format!(
                "reference rate {ref_rate} outside [{}, {}]",
                range.0, range.1
            ),
        ));
    }
    let (mut signal, mut noise) = (0.0, 0.0);
    for (&f, &p) in spec.freqs.iter().zip(&spec.power) {
        let r = 60.0 * f;
        if r < range.0 || r > range.1 {
            continue;
        }
        if (r - ref_rate).abs() <= 6.0 || (r - 2.0 * ref_rate).abs() <= 12.0 {
            signal += p;
        } else {
            noise += p;
        }
    }
    if noise <= 0.0 {
        return Ok(if signal > 0.0 { SNR_CAP_DB } else { 0.0 });
    }
    if signal <= 0.0 {
        return Ok(-SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).clamp(-SNR_CAP_DB, SNR_CAP_DB))
}

/// Template SNR of a trace against a reference rate.
pub fn snr(x: &SignalTrace, ref_rate: f64, kind: SignalKind) -> Result<f64> {
    let range = kind.snr_range();
    let min_len = (2.0 * 60.0 / ref_rate.max(range.0) * x.fs).ceil() as usize;
    if x.len() < min_len {
        return Err(Error::TooShort {
            op: "snr",
            need: min_len,
            got: x.len(),
        });
    }
    snr_from_spectrum(&periodogram(&x.samples, x.fs), ref_rate, range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tones(fs: f64, secs: f64, parts: &[(f64, f64)]) -> SignalTrace {
        let n = (fs * secs) as usize;
        let s = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                parts
                    .iter()
                    .map(|&(f, a)| a * (2.0 * PI * f * t).sin())
                    .sum()
            })
            .collect();
        SignalTrace::new(s, fs).unwrap()
    }

    #[test]
    fn pure_tone_rate() {
        let est = estimate_rate(&tones(30.0, 30.0, &[(1.2, 1.0)]), BandSpec::PULSE).unwrap();
        assert!((est.rate - 72.0).abs() <= 0.5);
        assert!(!est.low_confidence);
        let est = estimate_rate(
            &tones(30.0, 30.0, &[(1.2, 1.0), (2.0, 0.3)]),
            BandSpec::PULSE,
        )
        .unwrap();
        assert!((est.rate - 72.0).abs() <= 0.5);
    }

    #[test]
    fn tone_outside_band_is_low_confidence() {
        let est = estimate_rate(&tones(30.0, 30.0, &[(4.0, 1.0)]), BandSpec::PULSE).unwrap();
        assert!(est.low_confidence && est.peak_ratio < 2.0);
    }

    #[test]
    fn too_short_for_band() {
        let r = estimate_rate(&tones(30.0, 2.0, &[(1.2, 1.0)]), BandSpec::PULSE);
        assert!(matches!(r, Err(Error::TooShort { .. })));
    }

    #[test]
    fn snr_fixtures() {
        let x = tones(30.0, 30.0, &[(1.2, 10.0), (3.0, 1.0)]);
        let db = snr(&x, 72.0, SignalKind::Pulse).unwrap();
        assert!((db - 20.0).abs() <= 0.5, "{db}");
        let x = tones(30.0, 30.0, &[(1.2, 1.0), (3.0, 1.0)]);
        assert!(snr(&x, 72.0, SignalKind::Pulse).unwrap().abs() <= 0.5);
        assert!(snr(&x, 300.0, SignalKind::Pulse).is_err());
    }

    #[test]
    fn all_power_in_template_hits_cap() {
        let spec = Spectrum {
            freqs: vec![0.0, 1.0, 1.2, 2.0],
            power: vec![0.0, 0.0, 5.0, 0.0],
        };
        assert_eq!(
            snr_from_spectrum(&spec, 72.0, (30.0, 240.0)).unwrap(),
            SNR_CAP_DB
        );
    }
}
