use proptest::prelude::*;
use rppg_dsp::filter::{butter_bandpass, butter_bandpass_sos, sosfiltfilt};
use rppg_dsp::{BandSpec, SignalTrace};
use std::f64::consts::PI;

const FS: f64 = 30.0;

fn tone(f: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (2.0 * PI * f * i as f64 / FS).sin())
        .collect()
}

/// Squared magnitude of the second-order analog band-pass prototype at the
/// prewarped frequency; zero-phase application squares the one-pass gain.
fn analytic_zero_phase_gain(band: BandSpec, f: f64) -> f64 {
    let warp = |f: f64| (PI * f / FS).tan();
    let (wl, wh, w) = (warp(band.lo), warp(band.hi), warp(f));
    let q = (w * w - wl * wh) / (w * (wh - wl));
    1.0 / (1.0 + q.powi(4))
}

/// Amplitude over the middle half of a long filtered tone.
fn steady_amplitude(f: f64) -> f64 {
    let n = 3000;
    let y = sosfiltfilt(
        &butter_bandpass_sos(2, BandSpec::PULSE, FS).unwrap(),
        &tone(f, n),
    )
    .unwrap();
    let x = tone(f, n);
    let (a, b) = (n / 4, 3 * n / 4);
    // least-squares projection onto the input tone (phase is zero)
    let num: f64 = (a..b).map(|i| y[i] * x[i]).sum();
    let den: f64 = (a..b).map(|i| x[i] * x[i]).sum();
    num / den
}

#[test]
fn tone_in_band_matches_analytic_gain() {
    let got = steady_amplitude(1.5);
    let want = analytic_zero_phase_gain(BandSpec::PULSE, 1.5);
    assert!((got / want - 1.0).abs() <= 0.02, "{got} vs {want}");
}

#[test]
fn band_edges_have_half_gain() {
    for f in [0.75, 2.5] {
        let g = steady_amplitude(f);
        assert!((g - 0.5).abs() <= 0.02, "edge {f}: {g}");
    }
}

#[test]
fn dc_is_rejected() {
    let y = butter_bandpass(
        &SignalTrace::new(vec![3.0; 900], FS).unwrap(),
        BandSpec::PULSE,
    )
    .unwrap();
    assert!(
        y.samples.iter().all(|v| v.abs() <= 1e-6 * 3.0),
        "max {}",
        y.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
}

#[test]
fn edge_at_nyquist_is_rejected() {
    let x = SignalTrace::new(vec![0.0; 900], FS).unwrap();
    assert!(butter_bandpass(&x, BandSpec::new(1.0, 15.0).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filter_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 / 97.0).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37 + seed as f64).sin()).collect();
        let sos = butter_bandpass_sos(2, BandSpec::PULSE, FS).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = sosfiltfilt(&sos, &mix).unwrap();
        let (fx, fy) = (sosfiltfilt(&sos, &x).unwrap(), sosfiltfilt(&sos, &y).unwrap());
        for i in 0..n {
            prop_assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-6);
        }
    }

    #[test]
    fn filter_is_shift_invariant_in_steady_state(k in 1usize..40, f in 0.8f64..2.4) {
        let n = 1200;
        let sos = butter_bandpass_sos(2, BandSpec::PULSE, FS).unwrap();
        let x: Vec<f64> = (0..n + k).map(|i| (2.0 * PI * f * i as f64 / FS).sin() + 0.3 * (i as f64 * 1.3).cos()).collect();
        let y0 = sosfiltfilt(&sos, &x[k..]).unwrap();
        let y1 = sosfiltfilt(&sos, &x).unwrap();
        // compare away from both ends, where edge effects have decayed
        for i in 300..n - 300 {
            prop_assert!((y0[i] - y1[i + k]).abs() <= 1e-6, "i {} {} vs {}", i, y0[i], y1[i + k]);
        }
    }
}
