//! Framing, prosody extraction, mel spectrograms, delta features and
//! corpus normalization.
//!
//! Every feature operation frames the waveform with the same [`FrameSpec`],
//! so a prosody track, a mel spectrogram and a delta track computed from one
//! waveform always agree on the frame count `T`.

mod delta;
mod frame;
mod mel;
mod norm;
mod pitch;
pub mod wav;

pub use delta::delta_features;
pub use frame::{FrameSpec, Waveform};
pub use mel::{mel_filterbank, mel_spectrogram, MelSpectrogram, DEFAULT_N_FFT, DEFAULT_N_MELS};
pub use norm::{compute_stats, denormalize, normalize, NormStats};
pub use pitch::{extract_prosody, PitchConfig, ProsodyTrack};
pub(crate) use pitch::interpolate_gaps;

/// Floor used for log energy and log mel energies.
pub const LOG_FLOOR: f64 = 1e-10;
