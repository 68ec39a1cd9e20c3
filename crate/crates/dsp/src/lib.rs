//! Signal processing for camera-based vital signs: frame preprocessing,
//! Butterworth filtering, spectral rate estimation, metrics and the
//! classical CHROM / POS / ICA pulse extractors.

pub mod classical;
pub mod error;
pub mod filter;
pub mod jade;
pub mod metrics;
pub mod preprocess;
pub mod spectrum;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{BandSpec, SignalKind, SignalTrace};
