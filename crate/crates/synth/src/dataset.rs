//! Training windows cut from rendered clips.

use rppg_core::train::StoredWindow;
use rppg_dsp::preprocess::prepare_clip;

use crate::error::{Error, Result};
use crate::params::SynthParams;
use crate::render::{render_clip, RenderedClip};

/// First differences `x[t+1] − x[t]`, standardized over the clip. Entry `t`
/// lines up with difference frame `t`.
pub fn derivative_target(x: &[f64]) -> Vec<f32> {
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let n = d.len().max(1) as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    d.iter()
        .map(|v| {
            if sd > 0.0 {
                ((v - mean) / sd) as f32
            } else {
                0.0
            }
        })
        .collect()
}

/// Splits one clip into non-overlapping windows of `window_len` difference
/// frames. A trailing partial window is dropped.
pub fn clip_windows(
    r: &RenderedClip,
    window_len: usize,
    input_size: usize,
) -> Result<Vec<StoredWindow>> {
    if window_len == 0 {
        return Err(Error::Invalid("window_len must be positive".into()));
    }
    let frames = prepare_clip(&r.clip, input_size)?;
    let bvp = derivative_target(&r.truth.bvp);
    let resp = derivative_target(&r.truth.resp);
    let count = bvp.len() / window_len;
    if count == 0 {
        return Err(Error::Invalid(format!(
            "{} frames give no full window of {window_len} difference frames",
            r.clip.num_frames()
        )));
    }
    (0..count)
        .map(|i| {
            let (a, b) = (i * window_len, (i + 1) * window_len);
            Ok(StoredWindow {
                motion: frames.motion.narrow_outer(a, b)?,
                raw: frames.raw.narrow_outer(a, b)?,
                bvp: bvp[a..b].to_vec(),
                resp: resp[a..b].to_vec(),
            })
        })
        .collect()
}

/// Renders each clip and concatenates its windows in order.
pub fn make_dataset(
    clips: &[SynthParams],
    window_len: usize,
    input_size: usize,
) -> Result<Vec<StoredWindow>> {
    let mut out = Vec::new();
    for p in clips {
        out.extend(clip_windows(&render_clip(p)?, window_len, input_size)?);
    }
    Ok(out)
}
