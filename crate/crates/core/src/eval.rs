//! Evaluation metrics and the training-criterion arithmetic of the two
//! model halves (acoustic model and vocoder).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decode::TokenId;
use crate::dsp::ProsodyTrack;
use crate::error::{Error, Result};

/// The four acoustic-model loss terms and the two vocoder loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pl_lab: f64,
    pub dur: f64,
    pub vq: f64,
    pub pros: f64,
    pub hifigan: f64,
    pub mel: f64,
}

/// `L_PL_lab + L_dur + L_VQ + L_pros`.
pub fn txt2vec_loss(lb: &LossBreakdown) -> f64 {
    lb.pl_lab + lb.dur + lb.vq + lb.pros
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmupConfig {
    pub alpha: f64,
    pub warmup_steps: u64,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        Self { alpha: 60.0, warmup_steps: 200_000 }
    }
}

/// `alpha` for steps `0..warmup_steps`, then 0.
pub fn warmup_weight(cfg: &WarmupConfig, step: u64) -> f64 {
    if step < cfg.warmup_steps {
        cfg.alpha
    } else {
        0.0
    }
}

/// `L_HifiGAN + α(step) · L_mel`.
pub fn vec2wav_loss(lb: &LossBreakdown, cfg: &WarmupConfig, step: u64) -> f64 {
    lb.hifigan + warmup_weight(cfg, step) * lb.mel
}

/// Counts behind a gross pitch error: frames voiced in both tracks and how
/// many of them deviate by more than the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GpeCounts {
    pub errors: usize,
    pub voiced: usize,
}

impl GpeCounts {
    pub fn add(&mut self, other: GpeCounts) {
        self.errors += other.errors;
        self.voiced += other.voiced;
    }

    pub fn ratio(&self) -> Result<f64> {
        if self.voiced == 0 {
            return Err(Error::NoVoicedOverlap);
        }
        Ok(self.errors as f64 / self.voiced as f64)
    }
}

pub const DEFAULT_GPE_THRESHOLD: f64 = 0.2;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    Ok(())
}

pub fn gpe_counts(reference: &ProsodyTrack, hypothesis: &ProsodyTrack, threshold: f64) -> Result<GpeCounts> {
    gpe_counts_raw(
        &reference.log_pitch(),
        &reference.voiced,
        &hypothesis.log_pitch(),
        &hypothesis.voiced,
        threshold,
    )
}

pub(crate) fn gpe_counts_raw(
    ref_lp: &[f64],
    ref_voiced: &[bool],
    hyp_lp: &[f64],
    hyp_voiced: &[bool],
    threshold: f64,
) -> Result<GpeCounts> {
    check_len(ref_lp.len(), hyp_lp.len())?;
    let mut counts = GpeCounts::default();
    for t in 0..ref_lp.len() {
        if !(ref_voiced[t] && hyp_voiced[t]) {
            continue;
        }
        counts.voiced += 1;
        let (f_ref, f_hyp) = (ref_lp[t].exp(), hyp_lp[t].exp());
        if (f_hyp - f_ref).abs() / f_ref > threshold {
            counts.errors += 1;
        }
    }
    Ok(counts)
}

/// Fraction of jointly voiced frames whose pitch (in Hz) deviates from the
/// reference by more than `threshold`, relative to the reference.
pub fn gpe(reference: &ProsodyTrack, hypothesis: &ProsodyTrack, threshold: f64) -> Result<f64> {
    gpe_counts(reference, hypothesis, threshold)?.ratio()
}

/// Fraction of positions where the two sequences agree.
pub fn token_accuracy(reference: &[TokenId], hypothesis: &[TokenId]) -> Result<f64> {
    check_len(reference.len(), hypothesis.len())?;
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty token sequences".into()));
    }
    let hits = reference.iter().zip(hypothesis).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / reference.len() as f64)
}

/// Log-pitch contour with its voiced mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitchTrack {
    pub log_pitch: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchTrack {
    pub fn new(log_pitch: Vec<f64>, voiced: Vec<bool>) -> Result<Self> {
        check_len(log_pitch.len(), voiced.len())?;
        Ok(Self { log_pitch, voiced })
    }

    pub fn len(&self) -> usize {
        self.log_pitch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pitch.is_empty()
    }
}

impl From<&ProsodyTrack> for PitchTrack {
    fn from(t: &ProsodyTrack) -> Self {
        Self { log_pitch: t.log_pitch(), voiced: t.voiced.clone() }
    }
}

/// Pairwise mean `|Δ log-pitch|` over jointly voiced frames. Symmetric with
/// a zero diagonal.
pub fn hypothesis_divergence(tracks: &[PitchTrack]) -> Result<Vec<Vec<f64>>> {
    if tracks.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 tracks, got {}", tracks.len())));
    }
    for t in tracks {
        check_len(tracks[0].len(), t.len())?;
    }
    let n = tracks.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&tracks[i], &tracks[j]);
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in 0..a.len() {
                if a.voiced[t] && b.voiced[t] {
                    sum += (a.log_pitch[t] - b.log_pitch[t]).abs();
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::NoVoicedOverlap);
            }
            m[i][j] = sum / count as f64;
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// Divergence matrix as CSV with a `hypothesis` header column.
pub fn divergence_csv(matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("hypothesis");
    for j in 0..matrix.len() {
        let _ = write!(out, ",{j}");
    }
    out.push('\n');
    for (i, row) in matrix.iter().enumerate() {
        let _ = write!(out, "{i}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub gpe: f64,
    pub token_accuracy: f64,
    pub n_voiced_frames: usize,
    pub n_tokens: usize,
    /// Accuracy of the top prosody-label hypothesis.
    pub pl_label_accuracy: f64,
    pub n_labels: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn track(hz: &[f64], voiced: &[bool]) -> ProsodyTrack {
        let mut frames = Array2::zeros((hz.len(), 3));
        for (t, f) in hz.iter().enumerate() {
            frames[[t, 0]] = f.ln();
        }
        ProsodyTrack::new(frames, voiced.to_vec()).unwrap()
    }

    #[test]
    fn loss_sums() {
        assert_eq!(txt2vec_loss(&LossBreakdown::default()), 0.0);
        let lb = LossBreakdown { pl_lab: 1.0, dur: 2.0, vq: 3.0, pros: 4.0, ..Default::default() };
        assert_eq!(txt2vec_loss(&lb), 10.0);
        let lb = LossBreakdown { hifigan: 1.0, mel: 0.5, ..Default::default() };
        assert_eq!(vec2wav_loss(&lb, &WarmupConfig::default(), 10), 31.0);
        assert_eq!(vec2wav_loss(&lb, &WarmupConfig::default(), 200_000), 1.0);
    }

    #[test]
    fn warmup_boundary() {
        let cfg = WarmupConfig::default();
        assert_eq!(warmup_weight(&cfg, 0), 60.0);
        assert_eq!(warmup_weight(&cfg, 199_999), 60.0);
        assert_eq!(warmup_weight(&cfg, 200_000), 0.0);
        assert_eq!(warmup_weight(&cfg, 1_000_000), 0.0);
        let off = WarmupConfig { alpha: 60.0, warmup_steps: 0 };
        assert_eq!(warmup_weight(&off, 0), 0.0);
    }

    #[test]
    fn gpe_cases() {
        let all = vec![true; 10];
        let a = track(&[200.0; 10], &all);
        assert_eq!(gpe(&a, &a, 0.2).unwrap(), 0.0);
        let b = track(&[250.0; 10], &all);
        assert_eq!(gpe(&a, &b, 0.2).unwrap(), 1.0);
        let mut hz = vec![260.0; 3];
        hz.extend(vec![210.0; 7]);
        assert_eq!(gpe(&a, &track(&hz, &all), 0.2).unwrap(), 0.3);
    }

    #[test]
    fn gpe_uses_joint_voicing() {
        let r = track(&[100.0, 100.0, 100.0, 100.0], &[true, true, false, true]);
        let h = track(&[100.0, 150.0, 150.0, 150.0], &[true, false, true, true]);
        assert_eq!(gpe_counts(&r, &h, 0.2).unwrap(), GpeCounts { errors: 1, voiced: 2 });
        let silent = track(&[100.0; 4], &[false; 4]);
        assert!(matches!(gpe(&r, &silent, 0.2), Err(Error::NoVoicedOverlap)));
        assert!(matches!(gpe(&r, &track(&[1.0], &[true]), 0.2), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(token_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(token_accuracy(&[1, 2, 3], &[4, 5, 6]).unwrap(), 0.0);
        let r = [0, 1, 2, 3, 4, 5, 6, 7];
        let h = [0, 9, 2, 9, 9, 5, 9, 9];
        assert_eq!(token_accuracy(&r, &h).unwrap(), 0.375);
        assert!(token_accuracy(&r, &h[..4]).is_err());
    }

    #[test]
    fn divergence_cases() {
        let a = PitchTrack::new(vec![5.0, 5.1, 5.2, 5.3], vec![true; 4]).unwrap();
        let dup = hypothesis_divergence(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(dup, vec![vec![0.0; 2]; 2]);
        let shifted = PitchTrack::new(a.log_pitch.iter().map(|v| v + 0.1).collect(), vec![true; 4]).unwrap();
        let m = hypothesis_divergence(&[a.clone(), shifted]).unwrap();
        assert!((m[0][1] - 0.1).abs() < 1e-12);

        // Hand-listed tracks:
        //   t1 = [1, 2, 3, 4] all voiced
        //   t2 = [1, 3, 3, 2] unvoiced at frame 3
        //   t3 = [0, 2, 5, 4] all voiced
        // t1/t2 over frames 0..3: |0|+|1|+|0| = 1 → 1/3
        // t1/t3: 1+0+2+0 = 3 → 3/4
        // t2/t3 over frames 0..3: 1+1+2 = 4 → 4/3
        let t1 = PitchTrack::new(vec![1.0, 2.0, 3.0, 4.0], vec![true; 4]).unwrap();
        let t2 = PitchTrack::new(vec![1.0, 3.0, 3.0, 2.0], vec![true, true, true, false]).unwrap();
        let t3 = PitchTrack::new(vec![0.0, 2.0, 5.0, 4.0], vec![true; 4]).unwrap();
        let m = hypothesis_divergence(&[t1, t2, t3]).unwrap();
        let expect = [[0.0, 1.0 / 3.0, 0.75], [1.0 / 3.0, 0.0, 4.0 / 3.0], [0.75, 4.0 / 3.0, 0.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - expect[i][j]).abs() < 1e-12);
            }
        }
        assert!(hypothesis_divergence(&[a]).is_err());
    }

    #[test]
    fn divergence_csv_layout() {
        let csv = divergence_csv(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(csv, "hypothesis,0,1\n0,0,0.5\n1,0.5,0\n");
    }

    proptest! {
        #[test]
        fn gpe_scale_invariant(
            pairs in proptest::collection::vec((80.0f64..400.0, 0.5f64..1.5, any::<bool>()), 1..40),
        ) {
            // Keep deviations away from the threshold so rounding cannot flip a frame.
            let pairs: Vec<_> = pairs.into_iter().filter(|p| ((p.1 - 1.0f64).abs() - 0.2).abs() > 1e-6).collect();
            prop_assume!(pairs.iter().any(|p| p.2));
            let rf: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let hf: Vec<f64> = pairs.iter().map(|p| p.0 * p.1).collect();
            let v: Vec<bool> = pairs.iter().map(|p| p.2).collect();
            let base = gpe(&track(&rf, &v), &track(&hf, &v), 0.2).unwrap();
            let r2: Vec<f64> = rf.iter().map(|f| f * 2.0).collect();
            let h2: Vec<f64> = hf.iter().map(|f| f * 2.0).collect();
            let doubled = gpe(&track(&r2, &v), &track(&h2, &v), 0.2).unwrap();
            prop_assert_eq!(base, doubled);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn accuracy_bounded(a in proptest::collection::vec(0u32..4, 1..30), seed in any::<u64>()) {
            let b: Vec<u32> = a.iter().enumerate().map(|(i, &x)| if (seed >> (i % 64)) & 1 == 1 { x } else { (x + 1) % 4 }).collect();
            let acc = token_accuracy(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
        }

        #[test]
        fn divergence_symmetric(
            vals in proptest::collection::vec(proptest::collection::vec(3.0f64..7.0, 6), 2..5),
        ) {
            let tracks: Vec<PitchTrack> = vals.into_iter().map(|v| PitchTrack::new(v, vec![true; 6]).unwrap()).collect();
            let m = hypothesis_divergence(&tracks).unwrap();
            for i in 0..m.len() {
                prop_assert_eq!(m[i][i], 0.0);
                for j in 0..m.len() {
                    prop_assert_eq!(m[i][j], m[j][i]);
                    prop_assert!(m[i][j] >= 0.0);
                }
            }
        }
    }
}
