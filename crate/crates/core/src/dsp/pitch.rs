//! Normalized-autocorrelation pitch tracking with a probability-of-voicing
//! estimate and log energy.

use ndarray::Array2;
use rayon::prelude::*;

use super::{FrameSpec, Waveform, LOG_FLOOR};
use crate::error::{Error, Result};

/// Column indices of a [`ProsodyTrack`].
pub const LOG_PITCH: usize = 0;
pub const ENERGY: usize = 1;
pub const POV: usize = 2;

/// Relative height a local autocorrelation peak needs (against the global
/// maximum) to be taken as the period. Picking the first such peak avoids
/// locking onto subharmonics.
const PEAK_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f_min: 50.0,
            f_max: 600.0,
            voicing_threshold: 0.3,
        }
    }
}

impl PitchConfig {
    fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let ok = self.f_min.is_finite()
            && self.f_max.is_finite()
            && 0.0 < self.f_min
            && self.f_min < self.f_max
            && self.f_max < nyquist;
        if !ok {
            return Err(Error::InvalidPitchRange {
                f_min: self.f_min,
                f_max: self.f_max,
                sample_rate,
            });
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return Err(Error::InvalidArgument(format!(
                "voicing threshold {} outside [0, 1]",
                self.voicing_threshold
            )));
        }
        Ok(())
    }
}

/// Per-frame `[log_pitch, energy, pov]` with a voiced mask.
///
/// `log_pitch` is finite on every frame: unvoiced stretches are linearly
/// interpolated between voiced neighbours and held at the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ProsodyTrack {
    pub frames: Array2<f64>,
    pub voiced: Vec<bool>,
}

impl ProsodyTrack {
    pub fn new(frames: Array2<f64>, voiced: Vec<bool>) -> Result<Self> {
        if frames.ncols() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: frames.ncols(),
            });
        }
        if frames.nrows() != voiced.len() {
            return Err(Error::LengthMismatch {
                left: frames.nrows(),
                right: voiced.len(),
            });
        }
        Ok(Self { frames, voiced })
    }

    pub fn len(&self) -> usize {
        self.voiced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voiced.is_empty()
    }

    pub fn log_pitch(&self) -> Vec<f64> {
        self.frames.column(LOG_PITCH).to_vec()
    }

    /// Pitch in Hz (`exp` of the stored log pitch).
    pub fn pitch_hz(&self) -> Vec<f64> {
        self.frames.column(LOG_PITCH).iter().map(|v| v.exp()).collect()
    }

    pub fn energy(&self) -> Vec<f64> {
        self.frames.column(ENERGY).to_vec()
    }

    pub fn pov(&self) -> Vec<f64> {
        self.frames.column(POV).to_vec()
    }
}

struct FrameEstimate {
    f0: f64,
    pov: f64,
    energy: f64,
}

/// Extracts log pitch, log energy and probability of voicing per frame.
///
/// For frame start `s` and lag `τ`, the normalized cross-correlation
/// compares `x[s..s+L]` with `x[s+τ..s+τ+L]`, where `L` is the frame length;
/// near the end of the signal the comparison shrinks to the samples that
/// exist and lags with less than half a frame of overlap are skipped.
pub fn extract_prosody(wave: &Waveform, spec: &FrameSpec, cfg: &PitchConfig) -> Result<ProsodyTrack> {
    let n_frames = spec.frames_for(wave)?;
    let rate = wave.sample_rate();
    cfg.validate(rate)?;

    let frame_len = spec.frame_len(rate);
    let shift = spec.frame_shift(rate);
    let lag_min = ((rate as f64 / cfg.f_max).floor() as usize).max(2);
    let lag_max = (rate as f64 / cfg.f_min).ceil() as usize;
    let x = wave.samples();

    let estimates: Vec<FrameEstimate> = (0..n_frames)
        .into_par_iter()
        .map(|t| analyse_frame(x, t * shift, frame_len, lag_min, lag_max, rate))
        .collect();

    let mut frames = Array2::zeros((n_frames, 3));
    let mut voiced = Vec::with_capacity(n_frames);
    let mut raw_pitch = Vec::with_capacity(n_frames);
    for (t, est) in estimates.iter().enumerate() {
        let is_voiced = est.pov >= cfg.voicing_threshold && est.pov > 0.0;
        voiced.push(is_voiced);
        raw_pitch.push(if is_voiced { Some(est.f0.ln()) } else { None });
        frames[[t, ENERGY]] = est.energy;
        frames[[t, POV]] = est.pov;
    }
    let fallback = (cfg.f_min * cfg.f_max).sqrt().ln();
    for (t, lp) in interpolate_gaps(&raw_pitch, fallback).into_iter().enumerate() {
        frames[[t, LOG_PITCH]] = lp;
    }
    ProsodyTrack::new(frames, voiced)
}

fn analyse_frame(
    x: &[f64],
    start: usize,
    frame_len: usize,
    lag_min: usize,
    lag_max: usize,
    rate: u32,
) -> FrameEstimate {
    let frame = &x[start..start + frame_len];
    let rms = (frame.iter().map(|v| v * v).sum::<f64>() / frame_len as f64).sqrt();
    let energy = (rms + LOG_FLOOR).ln();

    // r[i] holds the correlation at lag (lag_min - 1 + i); the extra lag on
    // each side feeds the parabolic refinement.
    let lo = lag_min - 1;
    let corr: Vec<Option<f64>> = (lo..=lag_max + 1)
        .map(|lag| ncc(x, start, frame_len, lag))
        .collect();
    let at = |lag: usize| corr[lag - lo];

    let mut best: Option<(usize, f64)> = None;
    for lag in lag_min..=lag_max {
        if let Some(r) = at(lag) {
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((lag, r));
            }
        }
    }
    let Some((best_lag, best_r)) = best else {
        return FrameEstimate { f0: 0.0, pov: 0.0, energy };
    };
    if best_r <= 0.0 {
        return FrameEstimate { f0: rate as f64 / best_lag as f64, pov: 0.0, energy };
    }

    let is_local_max = |lag: usize| match (at(lag - 1), at(lag), at(lag + 1)) {
        (Some(a), Some(b), Some(c)) => b >= a && b >= c,
        _ => false,
    };
    let lag = (lag_min..=lag_max)
        .find(|&lag| is_local_max(lag) && at(lag).is_some_and(|r| r >= PEAK_RATIO * best_r))
        .unwrap_or(best_lag);

    let peak = at(lag).unwrap_or(0.0);
    let offset = match (at(lag - 1), at(lag + 1)) {
        (Some(a), Some(c)) => {
            let denom = a - 2.0 * peak + c;
            if denom < 0.0 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    FrameEstimate {
        f0: rate as f64 / (lag as f64 + offset),
        pov: peak.clamp(0.0, 1.0),
        energy,
    }
}

/// Normalized cross-correlation between the frame and its copy shifted by
/// `lag`, or `None` when fewer than half a frame of samples overlap.
fn ncc(x: &[f64], start: usize, frame_len: usize, lag: usize) -> Option<f64> {
    let avail = x.len().checked_sub(start + lag)?;
    let m = avail.min(frame_len);
    if m * 2 < frame_len {
        return None;
    }
    let a = &x[start..start + m];
    let b = &x[start + lag..start + lag + m];
    let (mut num, mut ea, mut eb) = (0.0, 0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        num += u * v;
        ea += u * u;
        eb += v * v;
    }
    let denom = (ea * eb).sqrt();
    if denom < 1e-20 {
        Some(0.0)
    } else {
        Some(num / denom)
    }
}

/// Linear interpolation across `None` gaps, nearest-value hold at the edges,
/// `fallback` everywhere when nothing is known.
pub(crate) fn interpolate_gaps(values: &[Option<f64>], fallback: f64) -> Vec<f64> {
    let known: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return vec![fallback; values.len()];
    };
    let mut out = vec![0.0; values.len()];
    out[..first.0].fill(first.1);
    out[last.0..].fill(last.1);
    for pair in known.windows(2) {
        let ((i0, v0), (i1, v1)) = (pair[0], pair[1]);
        for (i, slot) in out.iter_mut().enumerate().take(i1 + 1).skip(i0) {
            let w = (i - i0) as f64 / (i1 - i0) as f64;
            *slot = v0 + w * (v1 - v0);
        }
    }
    out
}
