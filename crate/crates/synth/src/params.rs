use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    #[default]
    Static,
    /// Sinusoidal horizontal translation at `motion_rate_hz`.
    Sway,
    /// A new random horizontal offset every second.
    Reorient,
}

macro_rules! default_fn {
    ($name:ident, $ty:ty, $v:expr) => {
        fn $name() -> $ty {
            $v
        }
    };
}

default_fn!(def_size, usize, 72);
default_fn!(def_hr, f64, 72.0);
default_fn!(def_br, f64, 15.0);
default_fn!(def_u_c, [f64; 3], unit([0.78, 0.53, 0.42]));
default_fn!(def_u_p, [f64; 3], unit([0.33, 0.77, 0.53]));
default_fn!(def_u_s, [f64; 3], unit([1.0, 1.0, 1.0]));
default_fn!(def_s0, f64, 0.05);
default_fn!(def_i0, f64, 0.8);
default_fn!(def_pulse, f64, 0.01);
default_fn!(def_resp, f64, 0.003);
default_fn!(def_rsa, f64, 0.05);
default_fn!(def_motion_rate, f64, 0.2);
default_fn!(def_resp_motion, f64, 1.5);
default_fn!(def_coupling, f64, 0.02);
default_fn!(def_pulse_coupling, f64, 0.005);
default_fn!(def_noise, f64, 0.0);
default_fn!(def_texture, f64, 0.05);
default_fn!(def_background, [f64; 3], [0.25, 0.27, 0.3]);
default_fn!(def_true, bool, true);

pub fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Generator configuration. `fps` and `duration_s` are required in JSON;
/// everything else has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub fps: f64,
    pub duration_s: f64,
    #[serde(default = "def_size")]
    pub height: usize,
    #[serde(default = "def_size")]
    pub width: usize,
    #[serde(default = "def_hr")]
    pub hr_bpm: f64,
    #[serde(default = "def_br")]
    pub br_bpm: f64,
    /// Stationary skin color (unit vector).
    #[serde(default = "def_u_c")]
    pub u_c: [f64; 3],
    /// Pulsatile color direction (unit vector).
    #[serde(default = "def_u_p")]
    pub u_p: [f64; 3],
    /// Specular (light source) color (unit vector).
    #[serde(default = "def_u_s")]
    pub u_s: [f64; 3],
    /// Stationary specular strength.
    #[serde(default = "def_s0")]
    pub s_0: f64,
    /// Stationary luminance.
    #[serde(default = "def_i0")]
    pub i_0: f64,
    #[serde(default = "def_pulse")]
    pub pulse_amp: f64,
    #[serde(default = "def_resp")]
    pub resp_amp: f64,
    /// Fractional heart-rate modulation by respiration.
    #[serde(default = "def_rsa")]
    pub rsa_depth: f64,
    #[serde(default)]
    pub motion_kind: MotionKind,
    /// Horizontal motion amplitude in pixels.
    #[serde(default)]
    pub motion_amp: f64,
    #[serde(default = "def_motion_rate")]
    pub motion_rate_hz: f64,
    /// Vertical breathing displacement in pixels, `∝ r(t)`.
    #[serde(default = "def_resp_motion")]
    pub resp_motion_px: f64,
    /// Luminance coupling `Ψ = psi_m·m + psi_p·p`, with `m` the horizontal
    /// displacement in pixels.
    #[serde(default = "def_coupling")]
    pub psi_m: f64,
    #[serde(default = "def_pulse_coupling")]
    pub psi_p: f64,
    /// Specular coupling `Φ = phi_m·m + phi_p·p`.
    #[serde(default = "def_coupling")]
    pub phi_m: f64,
    #[serde(default = "def_pulse_coupling")]
    pub phi_p: f64,
    /// Standard deviation of additive Gaussian sensor noise.
    #[serde(default = "def_noise")]
    pub noise_sigma: f64,
    /// Relative amplitude of the fixed skin texture.
    #[serde(default = "def_texture")]
    pub texture_amp: f64,
    #[serde(default = "def_background")]
    pub background: [f64; 3],
    /// Round to 8-bit levels.
    #[serde(default = "def_true")]
    pub quantize: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SynthParams {
    pub fn new(fps: f64, duration_s: f64) -> Self {
        Self {
            fps,
            duration_s,
            height: def_size(),
            width: def_size(),
            hr_bpm: def_hr(),
            br_bpm: def_br(),
            u_c: def_u_c(),
            u_p: def_u_p(),
            u_s: def_u_s(),
            s_0: def_s0(),
            i_0: def_i0(),
            pulse_amp: def_pulse(),
            resp_amp: def_resp(),
            rsa_depth: def_rsa(),
            motion_kind: MotionKind::Static,
            motion_amp: 0.0,
            motion_rate_hz: def_motion_rate(),
            resp_motion_px: def_resp_motion(),
            psi_m: def_coupling(),
            psi_p: def_pulse_coupling(),
            phi_m: def_coupling(),
            phi_p: def_pulse_coupling(),
            noise_sigma: def_noise(),
            texture_amp: def_texture(),
            background: def_background(),
            quantize: true,
            seed: 0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SynthParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn num_frames(&self) -> usize {
        (self.fps * self.duration_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Params(m));
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.num_frames() < 2 {
            return bad(format!(
                "duration {} s gives fewer than 2 frames",
                self.duration_s
            ));
        }
        if self.height < 8 || self.width < 8 {
            return bad(format!(
                "resolution {}×{} below 8×8",
                self.height, self.width
            ));
        }
        if !(self.hr_bpm > 0.0 && self.br_bpm > 0.0) {
            return bad("rates must be positive".into());
        }
        if self.fps <= 2.0 * self.hr_bpm / 60.0 * (1.0 + self.rsa_depth) {
            return bad(format!(
                "fps {} does not resolve {} bpm",
                self.fps, self.hr_bpm
            ));
        }
        for (name, v) in [("u_c", self.u_c), ("u_p", self.u_p), ("u_s", self.u_s)] {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-6 {
                return bad(format!("{name} has norm {n}, expected 1"));
            }
        }
        let nonneg = [
            ("s_0", self.s_0),
            ("i_0", self.i_0),
            ("pulse_amp", self.pulse_amp),
            ("resp_amp", self.resp_amp),
            ("rsa_depth", self.rsa_depth),
            ("motion_amp", self.motion_amp),
            ("motion_rate_hz", self.motion_rate_hz),
            ("resp_motion_px", self.resp_motion_px),
            ("noise_sigma", self.noise_sigma),
            ("texture_amp", self.texture_amp),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and ≥ 0"));
            }
        }
        if self.rsa_depth >= 1.0 {
            return bad(format!("rsa_depth {} must be < 1", self.rsa_depth));
        }
        Ok(())
    }
}
