//! Non-neural core of a discrete-token TTS pipeline: prosody features,
//! grouped vector quantization, phoneme-level prosody labels, greedy and
//! beam-search decoding over discrete tokens, and evaluation metrics.

pub mod decode;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod prosody;
pub mod vq;

pub use error::{Error, Result};
