use crate::error::{Error, Result};

/// Mono audio samples in `[-1, 1]` with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidWaveform("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidWaveform(format!("non-finite sample at {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Analysis window length and hop, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
        }
    }
}

impl FrameSpec {
    pub fn new(frame_length_ms: f64, frame_shift_ms: f64) -> Result<Self> {
        let spec = Self {
            frame_length_ms,
            frame_shift_ms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.frame_length_ms.is_finite()
            && self.frame_shift_ms.is_finite()
            && self.frame_length_ms > 0.0
            && self.frame_shift_ms > 0.0
            && self.frame_shift_ms <= self.frame_length_ms;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidFrameSpec(format!(
                "length {} ms, shift {} ms",
                self.frame_length_ms, self.frame_shift_ms
            )))
        }
    }

    /// Window length in samples.
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        ((self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    /// Hop in samples.
    pub fn frame_shift(&self, sample_rate: u32) -> usize {
        ((self.frame_shift_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }

    /// `floor((n - frame_len) / shift) + 1`, or `None` when fewer than one
    /// full frame fits.
    pub fn num_frames(&self, n_samples: usize, sample_rate: u32) -> Option<usize> {
        let len = self.frame_len(sample_rate);
        if n_samples < len {
            return None;
        }
        Some((n_samples - len) / self.frame_shift(sample_rate) + 1)
    }

    /// Frame count for `wave`, or [`Error::InsufficientSamples`].
    pub fn frames_for(&self, wave: &Waveform) -> Result<usize> {
        self.validate()?;
        self.num_frames(wave.len(), wave.sample_rate())
            .ok_or(Error::InsufficientSamples {
                needed: self.frame_len(wave.sample_rate()),
                got: wave.len(),
            })
    }
}
