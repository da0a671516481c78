//! Phoneme-level prosody: per-phoneme averages of `[p, Δp, Δ²p]`, k-means
//! labels over them, and the centroid lookup that turns a label back into
//! a quantized prosody vector.

mod alignment;

use std::path::Path;

use ndarray::{Array2, ArrayView2};

pub use alignment::{Alignment, PhonemeSegment};

use crate::dsp::delta_features;
use crate::error::{Error, Result};
use crate::vq::{kmeans, nearest, Codebook, KMeansConfig};

/// Width of a phoneme-level prosody vector: 3 base dims and their two deltas.
pub const PL_DIM: usize = 9;

pub const DEFAULT_CLUSTERS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLProsodyRepr(pub [f64; PL_DIM]);

impl PLProsodyRepr {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean of rows `[start, end)` of a `T × 9` track.
pub fn phoneme_prosody(track9: ArrayView2<f64>, seg: &PhonemeSegment) -> Result<PLProsodyRepr> {
    if track9.ncols() != PL_DIM {
        return Err(Error::DimensionMismatch { expected: PL_DIM, got: track9.ncols() });
    }
    if seg.start_frame >= seg.end_frame || seg.end_frame > track9.nrows() {
        return Err(Error::InvalidSegment(format!(
            "[{}, {}) for {} frames",
            seg.start_frame,
            seg.end_frame,
            track9.nrows()
        )));
    }
    let mut out = [0.0; PL_DIM];
    for row in track9.rows().into_iter().skip(seg.start_frame).take(seg.len()) {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    let n = seg.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(PLProsodyRepr(out))
}

/// Deltas over the whole normalized `T × 3` track, then one average per
/// segment. Frames outside every segment contribute nothing.
pub fn utterance_reprs(
    normalized: ArrayView2<f64>,
    segments: &[PhonemeSegment],
    delta_window: usize,
) -> Result<(Array2<f64>, Vec<PLProsodyRepr>)> {
    let track9 = delta_features(normalized, delta_window)?;
    let reprs = segments
        .iter()
        .map(|s| phoneme_prosody(track9.view(), s))
        .collect::<Result<_>>()?;
    Ok((track9, reprs))
}

/// `n` centroids over 9-dim phoneme prosody vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PLProsodyCodebook {
    centroids: Array2<f64>,
    pub seed: Option<u64>,
}

impl PLProsodyCodebook {
    pub fn from_centroids(centroids: Array2<f64>, seed: Option<u64>) -> Result<Self> {
        if centroids.ncols() != PL_DIM {
            return Err(Error::DimensionMismatch { expected: PL_DIM, got: centroids.ncols() });
        }
        if centroids.nrows() < 2 {
            return Err(Error::InvalidArgument("prosody codebook needs at least 2 clusters".into()));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite prosody centroid".into()));
        }
        let rows: Vec<_> = centroids.rows().into_iter().collect();
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if rows[i] == rows[j] {
                    return Err(Error::InvalidArgument(format!("prosody centroids {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { centroids, seed })
    }

    pub fn n(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn centroids(&self) -> ArrayView2<'_, f64> {
        self.centroids.view()
    }

    /// Nearest centroid; lowest index on ties.
    pub fn label(&self, repr: &[f64]) -> Result<usize> {
        if repr.len() != PL_DIM {
            return Err(Error::DimensionMismatch { expected: PL_DIM, got: repr.len() });
        }
        Ok(nearest(self.centroids.view(), repr).0)
    }

    pub fn quantized_prosody(&self, label: usize) -> Result<[f64; PL_DIM]> {
        if label >= self.n() {
            return Err(Error::IndexOutOfRange { index: label, size: self.n() });
        }
        let mut out = [0.0; PL_DIM];
        out.iter_mut().zip(self.centroids.row(label)).for_each(|(o, v)| *o = *v);
        Ok(out)
    }

    /// Single-group view for the `VQCB` persistence format.
    pub fn to_codebook(&self) -> Codebook {
        Codebook::from_centroids(vec![self.centroids.clone()], self.seed).expect("valid prosody codebook")
    }

    pub fn from_codebook(cb: &Codebook) -> Result<Self> {
        if cb.groups() != 1 {
            return Err(Error::InvalidArgument(format!("expected 1 group, found {}", cb.groups())));
        }
        Self::from_centroids(cb.group(0).to_owned(), cb.seed)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_codebook().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_codebook(&Codebook::load(path)?)
    }
}

/// Clusters phoneme prosody vectors with the same k-means engine as
/// [`crate::vq::train_codebook`] (one group, `V = n`).
pub fn train_pl_codebook(reprs: &[PLProsodyRepr], n: usize, max_iters: usize, seed: u64) -> Result<PLProsodyCodebook> {
    if reprs.len() < n {
        return Err(Error::InsufficientData(format!("{} phoneme vectors for {n} clusters", reprs.len())));
    }
    let flat: Vec<f64> = reprs.iter().flat_map(|r| r.0).collect();
    let data = Array2::from_shape_vec((reprs.len(), PL_DIM), flat).expect("shape");
    let fit = kmeans(data.view(), &KMeansConfig { k: n, max_iters, seed })?;
    PLProsodyCodebook::from_centroids(fit.centroids, Some(seed))
}
