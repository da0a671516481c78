//! Synthetic corpus generator: harmonic "vowels" at a few pitch levels,
//! noise "fricatives" and silent gaps, with exact frame alignments.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Config;
use crate::dsp::{wav::write_wav, FrameSpec, Waveform};
use crate::error::Result;
use crate::prosody::{Alignment, PhonemeSegment};

const VOWELS: [(&str, [f64; 4]); 5] = [
    ("a", [1.0, 0.8, 0.5, 0.2]),
    ("e", [1.0, 0.3, 0.7, 0.4]),
    ("i", [1.0, 0.1, 0.2, 0.6]),
    ("o", [1.0, 0.9, 0.1, 0.05]),
    ("u", [1.0, 0.2, 0.05, 0.02]),
];
const PITCH_LEVELS: [f64; 4] = [120.0, 160.0, 210.0, 280.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub sample_rate: u32,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self { sample_rate: 16_000, n_train: 8, n_valid: 1, n_test: 2, seed: 7 }
    }
}

enum Sound {
    Vowel { weights: [f64; 4], f0_start: f64, f0_end: f64 },
    Noise,
}

/// Writes wavs, alignments, `manifest.tsv` and `config.toml` under `dir` and
/// returns the config path. The config uses small codebooks suited to the
/// corpus size.
pub fn write_toy_corpus(dir: &Path, spec: &ToySpec) -> Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let frame = FrameSpec::default();
    let (flen, shift) = (frame.frame_len(spec.sample_rate), frame.frame_shift(spec.sample_rate));
    std::fs::create_dir_all(dir.join("wav"))?;
    std::fs::create_dir_all(dir.join("lab"))?;

    let splits = [("train", spec.n_train), ("valid", spec.n_valid), ("test", spec.n_test)];
    let mut manifest = String::from("# id\twav\talignment\tsplit\n");
    let mut n = 0;
    for (split, count) in splits {
        for _ in 0..count {
            let id = format!("toy{n:03}");
            n += 1;
            let (alignment, sounds) = random_utterance(&mut rng, &id);
            let samples = render(&mut rng, &alignment, &sounds, spec.sample_rate, flen, shift);
            let wave = Waveform::new(samples, spec.sample_rate)?;
            write_wav(&dir.join(format!("wav/{id}.wav")), &wave)?;
            std::fs::write(dir.join(format!("lab/{id}.lab")), alignment.to_text())?;
            let _ = writeln!(manifest, "{id}\twav/{id}.wav\tlab/{id}.lab\t{split}");
        }
    }
    std::fs::write(dir.join("manifest.tsv"), manifest)?;

    let mut cfg = Config::default();
    cfg.features.sample_rate = spec.sample_rate;
    cfg.vq.entries_per_group = 16;
    cfg.vq.max_iters = 30;
    cfg.prosody.clusters = 8;
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml())?;
    Ok(path)
}

fn random_utterance(rng: &mut ChaCha8Rng, id: &str) -> (Alignment, Vec<Sound>) {
    let n_phones = rng.gen_range(5..=9);
    let mut t = rng.gen_range(2..5);
    let mut segments = Vec::new();
    let mut sounds = Vec::new();
    let mut level = rng.gen_range(0..PITCH_LEVELS.len());
    for _ in 0..n_phones {
        if rng.gen_bool(0.2) {
            t += rng.gen_range(2..5);
        }
        let len = rng.gen_range(6..16);
        if rng.gen_bool(0.25) {
            segments.push(PhonemeSegment::new("s", t, t + len));
            sounds.push(Sound::Noise);
        } else {
            let (name, weights) = VOWELS[rng.gen_range(0..VOWELS.len())];
            // Pitch wanders between neighbouring levels.
            let next = (level as i64 + rng.gen_range(-1..=1)).clamp(0, PITCH_LEVELS.len() as i64 - 1) as usize;
            segments.push(PhonemeSegment::new(name, t, t + len));
            sounds.push(Sound::Vowel { weights, f0_start: PITCH_LEVELS[level], f0_end: PITCH_LEVELS[next] });
            level = next;
        }
        t += len;
    }
    let n_frames = t + rng.gen_range(2..5);
    let alignment = Alignment::new(id, n_frames, segments).expect("generated segments are ordered");
    (alignment, sounds)
}

fn render(
    rng: &mut ChaCha8Rng,
    alignment: &Alignment,
    sounds: &[Sound],
    rate: u32,
    flen: usize,
    shift: usize,
) -> Vec<f64> {
    let n_samples = (alignment.n_frames - 1) * shift + flen;
    let mut frame_sound = vec![None; alignment.n_frames];
    for (i, seg) in alignment.segments.iter().enumerate() {
        for f in seg.start_frame..seg.end_frame {
            frame_sound[f] = Some(i);
        }
    }
    // Each sample belongs to the frame whose analysis window it centers.
    let centre_offset = flen / 2;
    let mut out = Vec::with_capacity(n_samples);
    let mut phase = 0.0;
    for s in 0..n_samples {
        let f = (s.saturating_sub(centre_offset) / shift).min(alignment.n_frames - 1);
        let v = match frame_sound[f].map(|i| (&alignment.segments[i], &sounds[i])) {
            None => 0.0,
            Some((_, Sound::Noise)) => 0.08 * (rng.gen::<f64>() * 2.0 - 1.0),
            Some((seg, Sound::Vowel { weights, f0_start, f0_end })) => {
                let seg_start = seg.start_frame * shift + centre_offset;
                let seg_len = (seg.len() * shift) as f64;
                let pos = ((s as f64 - seg_start as f64) / seg_len).clamp(0.0, 1.0);
                let f0 = f0_start + (f0_end - f0_start) * pos;
                phase = (phase + TAU * f0 / rate as f64) % TAU;
                let norm: f64 = weights.iter().sum();
                0.4 * weights.iter().enumerate().map(|(h, w)| w * ((h + 1) as f64 * phase).sin()).sum::<f64>() / norm
            }
        };
        out.push(v);
    }
    out
}
