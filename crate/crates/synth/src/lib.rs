//! Synthetic face videos with known pulse and respiration.
//!
//! Each pixel follows a skin reflection model: a stationary skin color
//! modulated by illumination changes, a specular term, and a pulsatile
//! color change along a fixed direction in RGB.

pub mod dataset;
pub mod error;
pub mod io;
pub mod params;
pub mod render;
pub mod waveform;

pub use dataset::make_dataset;
pub use error::{Error, Result};
pub use params::{MotionKind, SynthParams};
pub use render::{render_clip, RenderedClip};
pub use waveform::{synth_waveforms, GroundTruth};
