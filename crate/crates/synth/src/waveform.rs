//! Ground-truth pulse and respiration waveforms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use rppg_dsp::SignalTrace;

use crate::error::Result;
use crate::params::SynthParams;

/// Peak of `sin x + 0.5·sin 2x`.
const PULSE_PEAK: f64 = 1.299_038_105_676_658; // 3√3/4

/// Respiration `r(t) = sin(2π·f_br·t)`.
pub fn respiration(br_bpm: f64, t: f64) -> f64 {
    (2.0 * PI * br_bpm / 60.0 * t).sin()
}

/// Pulse phase in cycles. The instantaneous rate is
/// `f_hr·(1 + rsa·r(t))`, integrated in closed form.
pub fn pulse_phase(hr_bpm: f64, br_bpm: f64, rsa_depth: f64, t: f64) -> f64 {
    let fh = hr_bpm / 60.0;
    let fb = br_bpm / 60.0;
    let w = 2.0 * PI * fb;
    fh * (t + rsa_depth * (1.0 - (w * t).cos()) / w)
}

/// Pulse `b(t)` with a dicrotic second harmonic, unit peak.
pub fn pulse(hr_bpm: f64, br_bpm: f64, rsa_depth: f64, t: f64) -> f64 {
    let phi = pulse_phase(hr_bpm, br_bpm, rsa_depth, t);
    ((2.0 * PI * phi).sin() + 0.5 * (4.0 * PI * phi).sin()) / PULSE_PEAK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub fs: f64,
    pub hr_bpm: f64,
    pub br_bpm: f64,
    /// `b(t)` per frame.
    pub bvp: Vec<f64>,
    /// `r(t)` per frame.
    pub resp: Vec<f64>,
}

impl GroundTruth {
    pub fn bvp_trace(&self) -> Result<SignalTrace> {
        Ok(SignalTrace::new(self.bvp.clone(), self.fs)?)
    }

    pub fn resp_trace(&self) -> Result<SignalTrace> {
        Ok(SignalTrace::new(self.resp.clone(), self.fs)?)
    }
}

/// Samples both waveforms at the frame instants `t = i / fps`.
pub fn synth_waveforms(p: &SynthParams) -> Result<GroundTruth> {
    p.validate()?;
    let n = p.num_frames();
    let times = (0..n).map(|i| i as f64 / p.fps);
    Ok(GroundTruth {
        fs: p.fps,
        hr_bpm: p.hr_bpm,
        br_bpm: p.br_bpm,
        bvp: times
            .clone()
            .map(|t| pulse(p.hr_bpm, p.br_bpm, p.rsa_depth, t))
            .collect(),
        resp: times.map(|t| respiration(p.br_bpm, t)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_derivative_is_modulated_rate() {
        let (hr, br, rsa) = (72.0, 15.0, 0.1);
        for &t in &[0.3, 1.7, 4.1, 9.9] {
            let h = 1e-6;
            let num =
                (pulse_phase(hr, br, rsa, t + h) - pulse_phase(hr, br, rsa, t - h)) / (2.0 * h);
            let want = hr / 60.0 * (1.0 + rsa * respiration(br, t));
            assert!((num - want).abs() < 1e-7, "{num} vs {want}");
        }
    }

    #[test]
    fn pulse_has_unit_peak() {
        let peak = (0..100_000)
            .map(|i| pulse(60.0, 15.0, 0.0, i as f64 / 100_000.0).abs())
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-8, "{peak}");
    }
}
