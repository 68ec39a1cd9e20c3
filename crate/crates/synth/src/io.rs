//! Clip files: a VTF container with `frames` and `mask`, and a JSON sidecar
//! with the parameters and ground truth next to it.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rppg_core::tensor::VideoClip;
use rppg_core::vtf;

use crate::error::{Error, Result};
use crate::params::SynthParams;
use crate::render::RenderedClip;
use crate::waveform::GroundTruth;

pub const CLIP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub params: SynthParams,
    pub truth: GroundTruth,
}

pub fn sidecar_path(clip_path: &Path) -> PathBuf {
    clip_path.with_extension("json")
}

pub fn save_clip(path: impl AsRef<Path>, r: &RenderedClip, params: &SynthParams) -> Result<()> {
    let path = path.as_ref();
    vtf::save(path, &[("frames", &r.clip.frames), ("mask", &r.mask)])?;
    let side = Sidecar {
        schema_version: CLIP_SCHEMA_VERSION,
        params: params.clone(),
        truth: r.truth.clone(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

/// Loads a clip and its sidecar; fails if the sidecar is missing.
pub fn load_clip(path: impl AsRef<Path>) -> Result<(RenderedClip, SynthParams)> {
    let path = path.as_ref();
    let (clip, mask) = load_frames(path)?;
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if side.schema_version != CLIP_SCHEMA_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported clip schema {}",
            side.schema_version
        )));
    }
    let clip = VideoClip::new(clip.frames, side.truth.fs)?;
    let mask =
        mask.ok_or_else(|| Error::Invalid(format!("{} has no mask record", path.display())))?;
    Ok((
        RenderedClip {
            clip,
            truth: side.truth,
            mask,
        },
        side.params,
    ))
}

/// Reads the `frames` record (and `mask`, when present) of a VTF clip. The
/// frame rate comes from the sidecar if one exists, else 30 fps.
pub fn load_frames(path: impl AsRef<Path>) -> Result<(VideoClip, Option<rppg_core::Tensor<f32>>)> {
    let path = path.as_ref();
    let mut recs = vtf::load(path)?;
    let frames = vtf::take(&mut recs, "frames")?;
    let mask = vtf::take(&mut recs, "mask").ok();
    let fps = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(s) => serde_json::from_str::<Sidecar>(&s)?.truth.fs,
        Err(_) => 30.0,
    };
    Ok((VideoClip::new(frames, fps)?, mask))
}

/// Raw interleaved RGB24, frames back to back, no header.
pub fn export_rgb24(clip: &VideoClip, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = clip
        .frames
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}
