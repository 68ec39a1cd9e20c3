//! Clip-level inference: preprocessing, per-window forward passes and
//! reassembly of the per-frame outputs.

use rppg_core::model::{forward, ModelSpec, WeightSet, WindowInput};
use rppg_core::tensor::VideoClip;
use rppg_dsp::classical::detrend;
use rppg_dsp::preprocess::prepare_clip;
use rppg_dsp::SignalTrace;

#[derive(Clone, Debug)]
pub struct Prediction {
    pub bvp: SignalTrace,
    pub resp: Option<SignalTrace>,
    pub windows: usize,
    /// Difference frames past the last full window.
    pub dropped_frames: usize,
}

/// Running sum followed by a linear detrend. The heads predict first
/// differences; this turns them back into a waveform.
pub fn integrate(x: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let sums: Vec<f64> = x
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    if sums.len() < 2 {
        return sums;
    }
    detrend(&sums)
}

pub fn predict_clip(
    spec: &ModelSpec,
    weights: &WeightSet<f32>,
    clip: &VideoClip,
) -> anyhow::Result<Prediction> {
    spec.validate().map_err(crate::error::classify_core)?;
    weights
        .validate(spec)
        .map_err(crate::error::classify_core)?;
    let frames = prepare_clip(clip, spec.input_size)?;
    let diffs = frames.motion.dims()[0];
    let len = spec.window_len;
    let windows = diffs / len;
    if windows == 0 {
        return Err(crate::error::invalid(format!(
            "clip has {} frames, fewer than one window of {len} difference frames",
            clip.num_frames()
        )));
    }
    let (mut bvp, mut resp) = (Vec::with_capacity(windows * len), Vec::new());
    for i in 0..windows {
        let (a, b) = (i * len, (i + 1) * len);
        let input = WindowInput::from_frames(
            spec.arch,
            frames.motion.narrow_outer(a, b)?,
            &frames.raw.narrow_outer(a, b)?,
        );
        let out = forward(spec, weights, &input, false, 0)?;
        bvp.extend(out.bvp.iter().map(|&v| v as f64));
        if let Some(r) = out.resp {
            resp.extend(r.iter().map(|&v| v as f64));
        }
    }
    let bvp = SignalTrace::new(integrate(&bvp), clip.fps)?;
    let resp = if spec.multi_task {
        Some(SignalTrace::new(integrate(&resp), clip.fps)?)
    } else {
        None
    };
    Ok(Prediction {
        bvp,
        resp,
        windows,
        dropped_frames: diffs % len,
    })
}
