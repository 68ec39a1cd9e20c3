//! Frame resampling, normalized difference frames and standardization.

use rppg_core::tensor::{Tensor, VideoClip};

use crate::error::{Error, Result};

/// Guard added to the normalized-difference denominator.
pub const DIFF_EPS: f64 = 1e-7;

/// Overlap of `[i·scale, (i+1)·scale)` with every input cell, as
/// `(first input index, weights)` per output index. Weights sum to 1.
fn area_weights(n_in: usize, n_out: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let (a, b) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = a.floor() as usize;
            let last = (b.ceil() as usize).min(n_in);
            let w = (first..last)
                .map(|i| ((i + 1) as f64).min(b) - (i as f64).max(a))
                .map(|cover| cover / scale)
                .collect();
            (first, w)
        })
        .collect()
}

/// Box-filter resampling of an `H×W×C` frame to `out×out×C`, each output
/// pixel the coverage-weighted mean of the input area it spans.
pub fn downsample_frame(frame: &Tensor<f32>, out: usize) -> Result<Tensor<f32>> {
    let &[h, w, c] = frame.dims() else {
        return Err(Error::invalid(
            "downsample",
            format!("expected H×W×C, got {:?}", frame.dims()),
        ));
    };
    if h < out || w < out || out == 0 {
        return Err(Error::invalid(
            "downsample",
            format!("{h}×{w} frame is smaller than {out}×{out}"),
        ));
    }
    let wy = area_weights(h, out);
    let wx = area_weights(w, out);
    let src = frame.data();
    // rows first, then columns
    let mut rows = vec![0.0f64; out * w * c];
    for (oy, (y0, ws)) in wy.iter().enumerate() {
        for (k, &wt) in ws.iter().enumerate() {
            let base = (y0 + k) * w * c;
            for (acc, &v) in rows[oy * w * c..(oy + 1) * w * c]
                .iter_mut()
                .zip(&src[base..base + w * c])
            {
                *acc += wt * v as f64;
            }
        }
    }
    let mut data = vec![0.0f32; out * out * c];
    for oy in 0..out {
        for (ox, (x0, ws)) in wx.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for (k, &wt) in ws.iter().enumerate() {
                    acc += wt * rows[(oy * w + x0 + k) * c + ch];
                }
                data[(oy * out + ox) * c + ch] = acc as f32;
            }
        }
    }
    Ok(Tensor::new(vec![out, out, c], data)?)
}

/// Resamples every frame of a `T×H×W×C` tensor.
pub fn downsample_frames(frames: &Tensor<f32>, out: usize) -> Result<Tensor<f32>> {
    let t = frames.dims()[0];
    let resized = (0..t)
        .map(|i| downsample_frame(&frames.slice_outer(i), out))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::stack(&resized)?)
}

/// `(c(t+1) − c(t)) / (c(t) + c(t+1) + ε)` per pixel and channel, without
/// standardization.
pub fn normalized_difference_raw(frames: &Tensor<f32>) -> Result<Tensor<f32>> {
    let dims = frames.dims();
    if dims.len() != 4 || dims[0] < 2 {
        return Err(Error::invalid(
            "normalized_difference",
            format!("need T ≥ 2 frames, got {dims:?}"),
        ));
    }
    let frame = dims[1] * dims[2] * dims[3];
    let src = frames.data();
    let data = (0..(dims[0] - 1) * frame)
        .map(|i| {
            let (a, b) = (src[i] as f64, src[i + frame] as f64);
            ((b - a) / (a + b + DIFF_EPS)) as f32
        })
        .collect();
    let mut out_dims = dims.to_vec();
    out_dims[0] -= 1;
    Ok(Tensor::new(out_dims, data)?)
}

/// Zero mean, unit standard deviation over the whole tensor; a constant
/// tensor becomes all zeros.
pub fn standardize(t: &Tensor<f32>) -> Tensor<f32> {
    let n = t.len().max(1) as f64;
    let mean = t.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = t
        .data()
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Tensor::zeros(t.dims());
    }
    t.map(|v| ((v as f64 - mean) / sd) as f32)
}

/// Normalized difference frames standardized over the clip.
pub fn normalized_difference(frames: &Tensor<f32>) -> Result<Tensor<f32>> {
    Ok(standardize(&normalized_difference_raw(frames)?))
}

/// Network inputs for a whole clip: `T−1` standardized difference frames
/// and the standardized raw frames `0..T−1` aligned with them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFrames {
    pub motion: Tensor<f32>,
    pub raw: Tensor<f32>,
}

pub fn prepare_clip(clip: &VideoClip, size: usize) -> Result<ModelFrames> {
    let small = if clip.height() == size && clip.width() == size {
        clip.frames.clone()
    } else {
        downsample_frames(&clip.frames, size)?
    };
    let motion = normalized_difference(&small)?;
    let raw = standardize(&small.narrow_outer(0, clip.num_frames() - 1)?);
    Ok(ModelFrames { motion, raw })
}

/// Per-frame channel means weighted by an optional `H×W` mask.
pub fn channel_means(clip: &VideoClip, mask: Option<&Tensor<f32>>) -> Result<[Vec<f64>; 3]> {
    let (h, w) = (clip.height(), clip.width());
    if let Some(m) = mask {
        if m.dims() != [h, w] {
            return Err(Error::invalid(
                "channel_means",
                format!("mask {:?} does not match {h}×{w}", m.dims()),
            ));
        }
    }
    let weights: Vec<f64> = match mask {
        Some(m) => m.data().iter().map(|&v| v as f64).collect(),
        None => vec![1.0; h * w],
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("channel_means", "mask has no weight"));
    }
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    let data = clip.frames.data();
    for f in 0..clip.num_frames() {
        let frame = &data[f * h * w * 3..(f + 1) * h * w * 3];
        let mut acc = [0.0f64; 3];
        for (p, &wt) in weights.iter().enumerate() {
            for ch in 0..3 {
                acc[ch] += wt * frame[p * 3 + ch] as f64;
            }
        }
        for ch in 0..3 {
            out[ch].push(acc[ch] / total);
        }
    }
    Ok(out)
}
