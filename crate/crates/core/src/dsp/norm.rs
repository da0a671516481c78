use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ProsodyTrack;
use crate::error::{Error, Result};

/// Per-dimension corpus mean and standard deviation of `[log_pitch, energy, pov]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl NormStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; 3], std: [1.0; 3] }
    }
}

/// Two-pass mean/std (population) over every frame of the corpus.
///
/// Per-track partial sums may be computed in parallel; they are reduced in
/// corpus order so the result does not depend on thread count.
pub fn compute_stats(corpus: &[ProsodyTrack]) -> Result<NormStats> {
    let n: usize = corpus.iter().map(ProsodyTrack::len).sum();
    if n == 0 {
        return Err(Error::InsufficientData("empty prosody corpus".into()));
    }
    let sums: Vec<[f64; 3]> = corpus
        .par_iter()
        .map(|tr| column_sums(&tr.frames, |v, _| v))
        .collect();
    let mean = reduce(&sums).map(|s| s / n as f64);

    let sq: Vec<[f64; 3]> = corpus
        .par_iter()
        .map(|tr| column_sums(&tr.frames, |v, j| (v - mean[j]) * (v - mean[j])))
        .collect();
    let var = reduce(&sq).map(|s| s / n as f64);

    let mut std = [0.0; 3];
    for j in 0..3 {
        std[j] = var[j].sqrt();
        if !(std[j] > 1e-12 * mean[j].abs().max(1.0)) {
            return Err(Error::DegenerateDimension { dim: j });
        }
    }
    Ok(NormStats { mean, std })
}

fn column_sums(frames: &Array2<f64>, f: impl Fn(f64, usize) -> f64) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for row in frames.rows() {
        for j in 0..3 {
            acc[j] += f(row[j], j);
        }
    }
    acc
}

fn reduce(parts: &[[f64; 3]]) -> [f64; 3] {
    parts.iter().fold([0.0; 3], |mut acc, p| {
        for j in 0..3 {
            acc[j] += p[j];
        }
        acc
    })
}

/// `(x − mean) / std` per column. The voiced mask is carried through.
pub fn normalize(track: &ProsodyTrack, stats: &NormStats) -> ProsodyTrack {
    let mut frames = track.frames.clone();
    for mut row in frames.rows_mut() {
        for j in 0..3 {
            row[j] = (row[j] - stats.mean[j]) / stats.std[j];
        }
    }
    ProsodyTrack {
        frames,
        voiced: track.voiced.clone(),
    }
}

pub fn denormalize(track: &ProsodyTrack, stats: &NormStats) -> ProsodyTrack {
    let mut frames = track.frames.clone();
    for mut row in frames.rows_mut() {
        for j in 0..3 {
            row[j] = row[j] * stats.std[j] + stats.mean[j];
        }
    }
    ProsodyTrack {
        frames,
        voiced: track.voiced.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn tr(frames: Array2<f64>) -> ProsodyTrack {
        let n = frames.nrows();
        ProsodyTrack::new(frames, vec![true; n]).unwrap()
    }

    #[test]
    fn hand_computed_two_tracks() {
        let a = tr(array![[1.0, 2.0, 0.0], [3.0, 4.0, 1.0]]);
        let b = tr(array![[5.0, 6.0, 0.5]]);
        let s = compute_stats(&[a, b]).unwrap();
        // col0 {1,3,5}: mean 3, var 8/3. col1 {2,4,6}: mean 4, var 8/3.
        // col2 {0,1,0.5}: mean 0.5, var 1/6.
        let expect_mean = [3.0, 4.0, 0.5];
        let expect_std = [(8.0f64 / 3.0).sqrt(), (8.0f64 / 3.0).sqrt(), (1.0f64 / 6.0).sqrt()];
        for j in 0..3 {
            assert!((s.mean[j] - expect_mean[j]).abs() < 1e-12);
            assert!((s.std[j] - expect_std[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_stats_do_nothing() {
        let a = tr(array![[1.0, 2.0, 0.3], [-3.0, 4.5, 1.0]]);
        assert_eq!(normalize(&a, &NormStats::identity()), a);
    }

    #[test]
    fn degenerate_dimension() {
        let a = tr(array![[1.0, 2.0, 0.5], [3.0, 4.0, 0.5]]);
        let err = compute_stats(&[a]).unwrap_err();
        assert!(matches!(err, Error::DegenerateDimension { dim: 2 }));
        assert!(err.to_string().contains("degenerate dimension"));
    }

    proptest! {
        #[test]
        fn normalized_corpus_is_standard(
            lens in proptest::collection::vec(1usize..20, 1..5),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let corpus: Vec<ProsodyTrack> = lens
                .iter()
                .map(|&n| tr(Array2::from_shape_fn((n, 3), |_| rng.gen_range(-50.0..50.0))))
                .collect();
            let total: usize = lens.iter().sum();
            prop_assume!(total >= 2);
            let stats = compute_stats(&corpus).unwrap();
            let normed: Vec<ProsodyTrack> = corpus.iter().map(|t| normalize(t, &stats)).collect();
            let check = compute_stats(&normed).unwrap();
            for j in 0..3 {
                prop_assert!(check.mean[j].abs() < 1e-6);
                prop_assert!((check.std[j] - 1.0).abs() < 1e-6);
            }
            for (orig, n) in corpus.iter().zip(&normed) {
                let back = denormalize(n, &stats);
                for (a, b) in orig.frames.iter().zip(back.frames.iter()) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
