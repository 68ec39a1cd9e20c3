//! Butterworth band-pass design and zero-phase filtering.
//!
//! Design path: analog low-pass prototype poles, low-pass to band-pass
//! transform around prewarped edges, bilinear transform, one biquad per
//! conjugate pole pair with zeros at `z = ±1`, gain set to 1 at the digital
//! center frequency.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trace::{BandSpec, SignalTrace};

/// One second-order section, `a0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    pub fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + self.b[1] * zi + self.b[2] * zi * zi;
        let den = self.a[0] + self.a[1] * zi + self.a[2] * zi * zi;
        num / den
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

/// Cascade of biquads.
#[derive(Clone, Debug, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex gain at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * f / fs);
        self.sections.iter().map(|s| s.response(z)).product()
    }

    /// Zero-phase magnitude `|H(f)|²` seen by [`sosfiltfilt`].
    pub fn zero_phase_gain(&self, f: f64, fs: f64) -> f64 {
        self.response(f, fs).norm_sqr()
    }

    /// Reflection padding length used by [`sosfiltfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }
}

/// Order-`order` Butterworth band-pass (`2·order` poles).
pub fn butter_bandpass_sos(order: usize, band: BandSpec, fs: f64) -> Result<Sos> {
    band.check(fs)?;
    if order == 0 {
        return Err(Error::invalid("butterworth", "order must be positive"));
    }
    let k = 2.0 * fs;
    let w_lo = k * (PI * band.lo / fs).tan();
    let w_hi = k * (PI * band.hi / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut sections = Vec::with_capacity(order);
    let mut push_pair = |s: Complex64, partner: Complex64| {
        let z1 = (k + s) / (k - s);
        let z2 = (k + partner) / (k - partner);
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(z1 + z2).re, (z1 * z2).re],
        });
    };
    for i in 0..order {
        let p = Complex64::from_polar(1.0, PI * (2 * i + order + 1) as f64 / (2 * order) as f64);
        if p.im < -1e-12 {
            continue;
        }
        let half = p * bw / 2.0;
        let root = (half * half - w0_sq).sqrt();
        let (s1, s2) = (half + root, half - root);
        if p.im > 1e-12 {
            push_pair(s1, s1.conj());
            push_pair(s2, s2.conj());
        } else {
            push_pair(s1, s2);
        }
    }
    let mut sos = Sos { sections };
    let center = fs / PI * (w0_sq.sqrt() / k).atan();
    let g = sos.response(center, fs).norm();
    sos.sections[0].b.iter_mut().for_each(|v| *v /= g);
    Ok(sos)
}

/// Direct-form II transposed cascade. `zi` holds two states per section.
pub fn sosfilt(sos: &Sos, x: &[f64], zi: Option<&[[f64; 2]]>) -> Vec<f64> {
    let mut state: Vec<[f64; 2]> = match zi {
        Some(z) => z.to_vec(),
        None => vec![[0.0; 2]; sos.sections.len()],
    };
    let mut out = Vec::with_capacity(x.len());
    for &v in x {
        let mut u = v;
        for (s, z) in sos.sections.iter().zip(state.iter_mut()) {
            let y = s.b[0] * u + z[0];
            z[0] = s.b[1] * u - s.a[1] * y + z[1];
            z[1] = s.b[2] * u - s.a[2] * y;
            u = y;
        }
        out.push(u);
    }
    out
}

/// Initial states for a unit step at steady state.
pub fn sosfilt_zi(sos: &Sos) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.sections
        .iter()
        .map(|s| {
            let g = s.dc_gain();
            let z1 = s.b[2] - s.a[2] * g;
            let z0 = s.b[1] - s.a[1] * g + z1;
            let zi = [scale * z0, scale * z1];
            scale *= g;
            zi
        })
        .collect()
}

/// Forward-backward filtering with odd reflection padding of
/// [`Sos::pad_len`] samples at each end.
pub fn sosfiltfilt(sos: &Sos, x: &[f64]) -> Result<Vec<f64>> {
    let pad = sos.pad_len();
    let n = x.len();
    if n <= pad {
        return Err(Error::TooShort {
            op: "zero-phase filter",
            need: pad + 1,
            got: n,
        });
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = sosfilt_zi(sos);
    let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
    let mut y = sosfilt(sos, &ext, Some(&scaled(ext[0])));
    y.reverse();
    let mut y = sosfilt(sos, &y, Some(&scaled(y[0])));
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

/// Second-order zero-phase Butterworth band-pass.
pub fn butter_bandpass(x: &SignalTrace, band: BandSpec) -> Result<SignalTrace> {
    let sos = butter_bandpass_sos(2, band, x.fs)?;
    SignalTrace::new(sosfiltfilt(&sos, &x.samples)?, x.fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `|H(jΩ)|²` of the analog band-pass prototype, evaluated at the
    /// prewarped frequency of `f`.
    fn analog_gain_sq(order: usize, band: BandSpec, fs: f64, f: f64) -> f64 {
        let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
        let (wl, wh, w) = (warp(band.lo), warp(band.hi), warp(f));
        let q = (w * w - wl * wh) / (w * (wh - wl));
        1.0 / (1.0 + q.powi(2 * order as i32))
    }

    #[test]
    fn digital_response_matches_analog_prototype() {
        for order in [1, 2, 3, 4] {
            let band = BandSpec::PULSE;
            let sos = butter_bandpass_sos(order, band, 30.0).unwrap();
            assert_eq!(sos.sections.len(), order);
            for f in [0.1, 0.5, 0.75, 1.0, 1.5, 2.5, 4.0, 10.0, 14.0] {
                let got = sos.response(f, 30.0).norm_sqr();
                let want = analog_gain_sq(order, band, 30.0, f);
                assert!(
                    (got - want).abs() < 1e-9,
                    "order {order} f {f}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn zero_phase_gain_is_half_at_edges() {
        let sos = butter_bandpass_sos(2, BandSpec::PULSE, 30.0).unwrap();
        assert!((sos.zero_phase_gain(0.75, 30.0) - 0.5).abs() < 1e-9);
        assert!((sos.zero_phase_gain(2.5, 30.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn steady_state_zi_removes_step_transient() {
        let sos = butter_bandpass_sos(2, BandSpec::new(1.0, 3.0).unwrap(), 30.0).unwrap();
        let zi = sosfilt_zi(&sos);
        let y = sosfilt(&sos, &[1.0; 50], Some(&zi));
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn short_input_is_rejected() {
        let sos = butter_bandpass_sos(2, BandSpec::PULSE, 30.0).unwrap();
        assert!(matches!(
            sosfiltfilt(&sos, &[0.0; 15]),
            Err(Error::TooShort { need: 16, .. })
        ));
    }
}
