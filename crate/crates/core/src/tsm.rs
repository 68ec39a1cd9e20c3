//! Temporal shift and the appearance-to-motion soft attention bridge.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::sigmoid;
use crate::tensor::{Scalar, Tensor};

/// Channel partition for [`temporal_shift`].
///
/// Channels `[0, left)` advance by one frame, `[left, left + right)` are
/// delayed by one frame, and the remaining `static_chunk` channels pass
/// through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub window_len: usize,
    pub left_chunk: usize,
    pub right_chunk: usize,
    pub static_chunk: usize,
}

impl ShiftSpec {
    /// `floor(C/3)` channels each way, the remainder static.
    pub fn thirds(channels: usize, window_len: usize) -> Self {
        let third = channels / 3;
        Self {
            window_len,
            left_chunk: third,
            right_chunk: third,
            static_chunk: channels - 2 * third,
        }
    }

    /// All channels static; the shift becomes the identity.
    pub fn disabled(channels: usize, window_len: usize) -> Self {
        Self {
            window_len,
            left_chunk: 0,
            right_chunk: 0,
            static_chunk: channels,
        }
    }

    pub fn channels(&self) -> usize {
        self.left_chunk + self.right_chunk + self.static_chunk
    }

    fn check<S: Scalar>(&self, x: &Tensor<S>) -> Result<(usize, usize, usize)> {
        const OP: &str = "temporal_shift";
        let &[t, h, w, c] = x.dims() else {
            return Err(Error::invalid(
                OP,
                format!("expected T×H×W×C, got {:?}", x.dims()),
            ));
        };
        if c != self.channels() {
            return Err(Error::DimMismatch {
                op: OP,
                lhs_name: "input channels",
                lhs: c,
                rhs_name: "chunk sum",
                rhs: self.channels(),
            });
        }
        if self.window_len == 0 || t % self.window_len != 0 {
            return Err(Error::invalid(
                OP,
                format!(
                    "T = {t} is not a multiple of window_len = {}",
                    self.window_len
                ),
            ));
        }
        Ok((t, h * w, c))
    }
}

fn shift_channels<S: Scalar>(
    x: &Tensor<S>,
    window_len: usize,
    advance: Range<usize>,
    delay: Range<usize>,
    positions: usize,
    channels: usize,
) -> Tensor<S> {
    let t = x.dims()[0];
    let frame = positions * channels;
    let src = x.data();
    let mut out = src.to_vec();
    for f in 0..t {
        let pos_in_window = f % window_len;
        let next = (pos_in_window + 1 < window_len).then_some(f + 1);
        let prev = (pos_in_window > 0).then(|| f - 1);
        for p in 0..positions {
            let base = f * frame + p * channels;
            for ch in advance.clone() {
                out[base + ch] = next.map_or(S::zero(), |n| src[n * frame + p * channels + ch]);
            }
            for ch in delay.clone() {
                out[base + ch] = prev.map_or(S::zero(), |n| src[n * frame + p * channels + ch]);
            }
        }
    }
    Tensor::new(x.dims().to_vec(), out).expect("shape preserved")
}

/// Parameter-free shift along time within consecutive windows of
/// `spec.window_len` frames. Vacated boundary frames are zero-filled, so no
/// values cross a window edge.
pub fn temporal_shift<S: Scalar>(x: &Tensor<S>, spec: &ShiftSpec) -> Result<Tensor<S>> {
    let (_, positions, channels) = spec.check(x)?;
    let l = spec.left_chunk;
    let r = spec.right_chunk;
    Ok(shift_channels(
        x,
        spec.window_len,
        0..l,
        l..l + r,
        positions,
        channels,
    ))
}

/// Adjoint of [`temporal_shift`]: routes each output gradient back to the
/// frame it was read from.
pub fn temporal_shift_adjoint<S: Scalar>(grad: &Tensor<S>, spec: &ShiftSpec) -> Result<Tensor<S>> {
    let (_, positions, channels) = spec.check(grad)?;
    let l = spec.left_chunk;
    let r = spec.right_chunk;
    Ok(shift_channels(
        grad,
        spec.window_len,
        l..l + r,
        0..l,
        positions,
        channels,
    ))
}

/// Parameters of one attention bridge: a 1×1 convolution to a single
/// channel followed by a sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams<S = f32> {
    /// `1×1×Cin×1`.
    pub omega: Tensor<S>,
    /// Single-element bias.
    pub bias: Tensor<S>,
}

impl<S: Scalar> AttentionParams<S> {
    pub fn zeros(cin: usize) -> Self {
        Self {
            omega: Tensor::zeros(&[1, 1, cin, 1]),
            bias: Tensor::zeros(&[1]),
        }
    }
}

pub(crate) fn attention_geometry<S: Scalar>(
    xa: &Tensor<S>,
    omega: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<(usize, usize, usize, Vec<usize>)> {
    const OP: &str = "attention_mask";
    let (frames, positions, cin, out_dims) = match *xa.dims() {
        [h, w, c] => (1, h * w, c, vec![h, w, 1]),
        [t, h, w, c] => (t, h * w, c, vec![t, h, w, 1]),
        _ => {
            return Err(Error::invalid(
                OP,
                format!("expected H×W×C or T×H×W×C, got {:?}", xa.dims()),
            ))
        }
    };
    if omega.dims() != [1, 1, cin, 1] {
        return Err(Error::Shape {
            op: OP,
            expected: vec![1, 1, cin, 1],
            found: omega.dims().to_vec(),
        });
    }
    if bias.len() != 1 {
        return Err(Error::Shape {
            op: OP,
            expected: vec![1],
            found: bias.dims().to_vec(),
        });
    }
    Ok((frames, positions, cin, out_dims))
}

/// Per-position sigmoid of the 1×1 projection, `σ(ω·x + b)`.
pub(crate) fn attention_logits_sigmoid<S: Scalar>(
    xa: &Tensor<S>,
    omega: &Tensor<S>,
    bias: S,
    cin: usize,
) -> Vec<S> {
    let w = omega.data();
    xa.data()
        .chunks_exact(cin)
        .map(|px| {
            let mut z = bias;
            for (&x, &wv) in px.iter().zip(w) {
                z += x * wv;
            }
            sigmoid(z)
        })
        .collect()
}

/// Soft attention mask `H·W·σ(ω x + b) / (2‖σ(ω x + b)‖₁)`.
///
/// A rank-3 `H×W×C` input yields one `H×W×1` mask. A rank-4 `T×H×W×C`
/// input yields `T×H×W×1`, each frame normalized on its own. Every mask
/// sums to `H·W/2`.
pub fn attention_mask<S: Scalar>(
    xa: &Tensor<S>,
    omega: &Tensor<S>,
    bias: &Tensor<S>,
) -> Result<Tensor<S>> {
    let (frames, positions, cin, out_dims) = attention_geometry(xa, omega, bias)?;
    xa.ensure_finite("attention input")?;
    let mut s = attention_logits_sigmoid(xa, omega, bias.data()[0], cin);
    let n = S::from_usize(positions).unwrap();
    let two = S::from_f64_lossy(2.0);
    for frame in s.chunks_exact_mut(positions).take(frames) {
        let l1: S = frame.iter().copied().sum();
        let scale = n / (two * l1);
        for v in frame.iter_mut() {
            *v *= scale;
        }
    }
    Tensor::new(out_dims, s)
}

pub fn attention_mask_with<S: Scalar>(xa: &Tensor<S>, p: &AttentionParams<S>) -> Result<Tensor<S>> {
    attention_mask(xa, &p.omega, &p.bias)
}

/// Number of frames a mask covers, validating it against `x`.
pub(crate) fn mask_frames<S: Scalar>(x: &Tensor<S>, mask: &Tensor<S>) -> Result<usize> {
    const OP: &str = "apply_mask";
    let &[t, h, w, _] = x.dims() else {
        return Err(Error::invalid(
            OP,
            format!("expected T×H×W×C, got {:?}", x.dims()),
        ));
    };
    let (mt, mh, mw) = match *mask.dims() {
        [mh, mw, 1] => (1, mh, mw),
        [mt, mh, mw, 1] => (mt, mh, mw),
        _ => {
            return Err(Error::invalid(
                OP,
                format!("mask must be [T×]H×W×1, got {:?}", mask.dims()),
            ))
        }
    };
    if (mh, mw) != (h, w) {
        return Err(Error::Shape {
            op: OP,
            expected: vec![h, w, 1],
            found: mask.dims().to_vec(),
        });
    }
    if mt != 1 && mt != t {
        return Err(Error::DimMismatch {
            op: OP,
            lhs_name: "input frames",
            lhs: t,
            rhs_name: "mask frames",
            rhs: mt,
        });
    }
    Ok(mt)
}

/// Gates every channel of `x` with the mask. A single-frame mask is
/// broadcast over all frames; a `T`-frame mask gates frame by frame.
pub fn apply_mask<S: Scalar>(x: &Tensor<S>, mask: &Tensor<S>) -> Result<Tensor<S>> {
    let mt = mask_frames(x, mask)?;
    let &[t, h, w, c] = x.dims() else {
        unreachable!()
    };
    let positions = h * w;
    let m = mask.data();
    let mut out = x.data().to_vec();
    for f in 0..t {
        let mf = if mt == 1 { 0 } else { f };
        for p in 0..positions {
            let g = m[mf * positions + p];
            for v in &mut out[(f * positions + p) * c..][..c] {
                *v *= g;
            }
        }
    }
    Tensor::new(x.dims().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_frame_example() {
        // channel values per frame: f0=1, f1=2, f2=3 on every channel
        let x = Tensor::from_fn(&[3, 1, 1, 3], |i| (i / 3 + 1) as f32);
        let spec = ShiftSpec::thirds(3, 3);
        let y = temporal_shift(&x, &spec).unwrap();
        let ch = |c: usize| (0..3).map(|f| y.at(&[f, 0, 0, c])).collect::<Vec<_>>();
        assert_eq!(ch(0), vec![2.0, 3.0, 0.0]);
        assert_eq!(ch(1), vec![0.0, 1.0, 2.0]);
        assert_eq!(ch(2), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn disabled_shift_is_identity() {
        let x = Tensor::from_fn(&[4, 2, 2, 5], |i| i as f32);
        assert_eq!(temporal_shift(&x, &ShiftSpec::disabled(5, 2)).unwrap(), x);
    }

    #[test]
    fn shift_never_crosses_windows() {
        let x = Tensor::from_fn(&[4, 1, 1, 3], |i| (i / 3 + 1) as f32);
        let y = temporal_shift(&x, &ShiftSpec::thirds(3, 2)).unwrap();
        // frame 1 is the last of window 0: advanced channel is zero-filled
        assert_eq!(y.at(&[1, 0, 0, 0]), 0.0);
        // frame 2 opens window 1: delayed channel is zero-filled
        assert_eq!(y.at(&[2, 0, 0, 1]), 0.0);
    }

    #[test]
    fn shift_validates_inputs() {
        let x = Tensor::<f32>::zeros(&[5, 1, 1, 3]);
        assert!(temporal_shift(&x, &ShiftSpec::thirds(3, 2)).is_err());
        assert!(temporal_shift(&x, &ShiftSpec::thirds(4, 5)).is_err());
    }

    #[test]
    fn thirds_with_remainder() {
        let s = ShiftSpec::thirds(8, 10);
        assert_eq!((s.left_chunk, s.right_chunk, s.static_chunk), (2, 2, 4));
    }

    #[test]
    fn zero_attention_is_one_half() {
        let xa = Tensor::from_fn(&[4, 4, 3], |i| i as f32 * 0.3 - 2.0);
        let p = AttentionParams::zeros(3);
        let m = attention_mask_with(&xa, &p).unwrap();
        assert_eq!(m.dims(), &[4, 4, 1]);
        assert!(m.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn attention_rejects_non_finite() {
        let mut xa = Tensor::<f32>::zeros(&[2, 2, 1]);
        xa.data_mut()[0] = f32::NAN;
        assert!(matches!(
            attention_mask_with(&xa, &AttentionParams::zeros(1)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn per_frame_masks_normalize_independently() {
        let xa = Tensor::from_fn(&[2, 3, 3, 2], |i| ((i * 7) % 5) as f32 - 2.0);
        let p = AttentionParams {
            omega: Tensor::new(vec![1, 1, 2, 1], vec![0.8, -1.1]).unwrap(),
            bias: Tensor::scalar(0.2),
        };
        let m = attention_mask_with(&xa, &p).unwrap();
        for f in 0..2 {
            let s: f32 = m.slice_outer(f).sum();
            assert!((s - 4.5).abs() < 1e-5);
        }
    }

    #[test]
    fn apply_mask_broadcasts() {
        let x = Tensor::from_fn(&[3, 2, 2, 2], |i| i as f32);
        let half = Tensor::full(&[2, 2, 1], 0.5f32);
        assert_eq!(apply_mask(&x, &half).unwrap(), x.map(|v| v * 0.5));
        let ones = Tensor::full(&[2, 2, 1], 1.0f32);
        assert_eq!(apply_mask(&x, &ones).unwrap(), x);
        assert!(apply_mask(&x, &Tensor::full(&[3, 2, 1], 1.0f32)).is_err());
        assert!(apply_mask(&x, &Tensor::full(&[2, 2, 2, 1], 1.0f32)).is_err());
    }
}
