use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::{FrameSpec, Waveform, LOG_FLOOR};
use crate::error::{Error, Result};

pub const DEFAULT_N_FFT: usize = 512;
pub const DEFAULT_N_MELS: usize = 80;

/// `T × n_mels` log-mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub frames: Array2<f64>,
    pub n_mels: usize,
}

impl MelSpectrogram {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of `n_mels` HTK-scale bands spanning `[0, rate/2]`,
/// with the two outer edges: `n_mels + 2` points.
pub fn mel_band_edges(n_mels: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Triangular filterbank, `n_mels × (n_fft/2 + 1)`, unit peak height.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Array2<f64> {
    let edges = mel_band_edges(n_mels, sample_rate);
    let n_bins = n_fft / 2 + 1;
    let bin_hz = sample_rate as f64 / n_fft as f64;
    let mut fb = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            fb[[m, k]] = w;
        }
    }
    fb
}

/// Periodic Hann window.
pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Hann-windowed magnitude STFT through a triangular mel filterbank
/// (0 Hz to Nyquist), then `ln(max(x, 1e-10))`.
pub fn mel_spectrogram(wave: &Waveform, spec: &FrameSpec, n_fft: usize, n_mels: usize) -> Result<MelSpectrogram> {
    let n_frames = spec.frames_for(wave)?;
    let rate = wave.sample_rate();
    let frame_len = spec.frame_len(rate);
    if frame_len > n_fft {
        return Err(Error::FrameExceedsFft { frame_len, n_fft });
    }
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be at least 1".into()));
    }
    let shift = spec.frame_shift(rate);
    let window = hann(frame_len);
    let fb = mel_filterbank(n_mels, n_fft, rate);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let n_bins = n_fft / 2 + 1;

    let mut frames = Array2::zeros((n_frames, n_mels));
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut mag = vec![0.0; n_bins];
    let x = wave.samples();
    for t in 0..n_frames {
        let start = t * shift;
        buf.fill(Complex::new(0.0, 0.0));
        for (i, (slot, w)) in buf.iter_mut().zip(&window).enumerate() {
            slot.re = x[start + i] * w;
        }
        fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for m in 0..n_mels {
            let e: f64 = fb.row(m).iter().zip(&mag).map(|(w, v)| w * v).sum();
            frames[[t, m]] = e.max(LOG_FLOOR).ln();
        }
    }
    Ok(MelSpectrogram { frames, n_mels })
}
