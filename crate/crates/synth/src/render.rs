//! Per-pixel skin reflection rendering.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rppg_core::rng::{self, SeededRng};
use rppg_core::tensor::{Tensor, VideoClip};

use crate::error::Result;
use crate::params::{MotionKind, SynthParams};
use crate::waveform::{synth_waveforms, GroundTruth};

/// Stream keys for the independent random parts of a clip.
const TEXTURE_KEY: u64 = 0x7E47;
const MOTION_KEY: u64 = 0x304E;
const NOISE_KEY: u64 = 0x0153;

const TEXTURE_WAVES: usize = 6;

#[derive(Clone, Debug)]
pub struct RenderedClip {
    pub clip: VideoClip,
    pub truth: GroundTruth,
    /// Skin coverage in `[0, 1]` at the rest position, `H×W`.
    pub mask: Tensor<f32>,
}

/// Fixed skin texture: a few plane waves in face coordinates, so it moves
/// with the face under subpixel translation. Roughly unit variance.
struct Texture {
    waves: Vec<(f64, f64, f64)>,
}

impl Texture {
    fn new(seed: u64) -> Self {
        let mut r = rng::seeded(rng::derive_seed(seed, TEXTURE_KEY));
        let waves = (0..TEXTURE_WAVES)
            .map(|_| {
                let k = rng::uniform(&mut r, 0.3, 1.2);
                let dir = rng::uniform(&mut r, 0.0, 2.0 * PI);
                (
                    k * dir.cos(),
                    k * dir.sin(),
                    rng::uniform(&mut r, 0.0, 2.0 * PI),
                )
            })
            .collect();
        Self { waves }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        let s: f64 = self
            .waves
            .iter()
            .map(|&(kx, ky, ph)| (kx * u + ky * v + ph).sin())
            .sum();
        s * (2.0 / TEXTURE_WAVES as f64).sqrt()
    }
}

/// Horizontal displacement `m(t)` in pixels.
fn motion_signal(p: &SynthParams, t: f64) -> f64 {
    p.motion_amp
        * match p.motion_kind {
            MotionKind::Static => 0.0,
            MotionKind::Sway => (2.0 * PI * p.motion_rate_hz * t).sin(),
            MotionKind::Reorient => {
                let second = t.floor().max(0.0) as u64;
                let mut r = rng::seeded(rng::derive_seed(
                    rng::derive_seed(p.seed, MOTION_KEY),
                    second,
                ));
                rng::uniform(&mut r, -1.0, 1.0)
            }
        }
}

/// Anti-aliased coverage of the ellipse centered at `(cx, cy)`.
fn coverage(x: f64, y: f64, cx: f64, cy: f64, a: f64, b: f64) -> f64 {
    let rho = (((x - cx) / a).powi(2) + ((y - cy) / b).powi(2)).sqrt();
    // signed distance to the boundary, approximated along the radius
    (0.5 - (rho - 1.0) * a.min(b)).clamp(0.0, 1.0)
}

fn gaussian(r: &mut SeededRng) -> f64 {
    StandardNormal.sample(r)
}

/// Renders the clip together with its ground truth and skin mask.
pub fn render_clip(p: &SynthParams) -> Result<RenderedClip> {
    let truth = synth_waveforms(p)?;
    let (h, w, n) = (p.height, p.width, p.num_frames());
    let (a, b) = (0.3 * w as f64, 0.4 * h as f64);
    let (cx0, cy0) = (w as f64 / 2.0, h as f64 / 2.0);
    let texture = Texture::new(p.seed);
    let noise_seed = rng::derive_seed(p.seed, NOISE_KEY);

    let mut mask = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            mask.push(coverage(x as f64 + 0.5, y as f64 + 0.5, cx0, cy0, a, b) as f32);
        }
    }

    let mut data = Vec::with_capacity(n * h * w * 3);
    for f in 0..n {
        let t = f as f64 / p.fps;
        let m = motion_signal(p, t);
        let pulsatile = p.pulse_amp * truth.bvp[f] + p.resp_amp * truth.resp[f];
        let psi = p.psi_m * m + p.psi_p * pulsatile;
        let phi = p.phi_m * m + p.phi_p * pulsatile;
        let cx = cx0 + m;
        let cy = cy0 + p.resp_motion_px * truth.resp[f];
        let mut noise = rng::seeded(rng::derive_seed(noise_seed, f as u64));
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let alpha = coverage(px, py, cx, cy, a, b);
                let c0 = if alpha > 0.0 {
                    1.0 + p.texture_amp * texture.at(px - cx, py - cy)
                } else {
                    0.0
                };
                for k in 0..3 {
                    let skin = p.i_0
                        * (p.u_c[k] * c0 * (1.0 + psi)
                            + p.u_s[k] * (p.s_0 + phi)
                            + p.u_p[k] * pulsatile);
                    let bg = p.i_0 * p.background[k] * (1.0 + psi);
                    let mut v = alpha * skin + (1.0 - alpha) * bg;
                    if p.noise_sigma > 0.0 {
                        v += p.noise_sigma * gaussian(&mut noise);
                    }
                    let v = v.clamp(0.0, 1.0);
                    data.push(if p.quantize {
                        (v * 255.0).round() / 255.0
                    } else {
                        v
                    } as f32);
                }
            }
        }
    }
    let frames = Tensor::new(vec![n, h, w, 3], data)?;
    Ok(RenderedClip {
        clip: VideoClip::new(frames, p.fps)?,
        truth,
        mask: Tensor::new(vec![h, w], mask)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_is_full_inside_and_empty_outside() {
        assert_eq!(coverage(10.0, 10.0, 10.0, 10.0, 5.0, 6.0), 1.0);
        assert_eq!(coverage(30.0, 10.0, 10.0, 10.0, 5.0, 6.0), 0.0);
        let edge = coverage(15.0, 10.0, 10.0, 10.0, 5.0, 6.0);
        assert!((edge - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reorientation_holds_within_a_second() {
        let mut p = SynthParams::new(30.0, 3.0);
        p.motion_kind = MotionKind::Reorient;
        p.motion_amp = 2.0;
        assert_eq!(motion_signal(&p, 1.1), motion_signal(&p, 1.9));
        assert_ne!(motion_signal(&p, 1.9), motion_signal(&p, 2.1));
    }
}
