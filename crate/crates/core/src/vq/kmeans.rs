//! Seeded Lloyd's algorithm with k-means++ initialization.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// `k × d`.
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Total squared distortion after each assignment step.
    pub distortion: Vec<f64>,
    pub converged: bool,
}

impl KMeansFit {
    pub fn iterations(&self) -> usize {
        self.distortion.len()
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid row; the lowest index
/// wins ties.
pub fn nearest(centroids: ArrayView2<f64>, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row.as_slice().expect("standard layout"), x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Clusters the rows of `data`.
///
/// Stops after `max_iters` assignment steps or as soon as an assignment step
/// changes nothing. Clusters left empty by an update step are re-seeded at
/// the point farthest from its own centroid. The result depends only on
/// `(data, cfg)`; the parallel assignment step is reduced in point order.
pub fn kmeans(data: ArrayView2<f64>, cfg: &KMeansConfig) -> Result<KMeansFit> {
    let (n, d) = data.dim();
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < cfg.k {
        return Err(Error::InsufficientData(format!("{n} points for {} clusters", cfg.k)));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in k-means data".into()));
    }
    let data = data.as_standard_layout().into_owned();
    let rows: Vec<&[f64]> = data.rows().into_iter().map(|r| r.to_slice().unwrap()).collect();

    let mut centroids = plus_plus_init(&rows, d, cfg)?;
    let mut assignments: Vec<usize> = Vec::new();
    let mut distortion = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iters.max(1) {
        let assigned: Vec<(usize, f64)> = rows
            .par_iter()
            .map(|x| nearest(centroids.view(), x))
            .collect();
        let total: f64 = assigned.iter().map(|a| a.1).sum();
        debug_assert!(
            distortion.last().is_none_or(|&prev: &f64| total <= prev + 1e-9 * prev.max(1.0)),
            "Lloyd distortion increased: {total} after {distortion:?}"
        );
        distortion.push(total);

        let next: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
        update_centroids(&rows, &mut assignments, &mut centroids);
    }

    Ok(KMeansFit {
        centroids,
        assignments,
        distortion,
        converged,
    })
}

fn plus_plus_init(rows: &[&[f64]], d: usize, cfg: &KMeansConfig) -> Result<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = rows.len();
    let mut centroids = Array2::zeros((cfg.k, d));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&ndarray::aview1(rows[first]));
    let mut d2: Vec<f64> = rows.iter().map(|x| sq_dist(x, rows[first])).collect();

    for c in 1..cfg.k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InsufficientData(format!(
                "fewer than {} distinct points",
                cfg.k
            )));
        }
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let pick = pick.expect("positive total weight");
        centroids.row_mut(c).assign(&ndarray::aview1(rows[pick]));
        for (w, x) in d2.iter_mut().zip(rows) {
            *w = w.min(sq_dist(x, rows[pick]));
        }
    }
    Ok(centroids)
}

fn update_centroids(rows: &[&[f64]], assignments: &mut [usize], centroids: &mut Array2<f64>) {
    let (k, d) = centroids.dim();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (x, &a) in rows.iter().zip(assignments.iter()) {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x.iter()) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mean = sums.row(c).mapv(|s| s / counts[c] as f64);
            centroids.row_mut(c).assign(&mean);
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        // Farthest point from its own centroid; ties go to the lowest index.
        let mut far = (usize::MAX, -1.0);
        for (i, x) in rows.iter().enumerate() {
            if counts[assignments[i]] <= 1 {
                continue;
            }
            let dist = sq_dist(x, centroids.row(assignments[i]).as_slice().unwrap());
            if dist > far.1 {
                far = (i, dist);
            }
        }
        if far.0 == usize::MAX {
            continue;
        }
        let i = far.0;
        counts[assignments[i]] -= 1;
        assignments[i] = c;
        counts[c] = 1;
        centroids.row_mut(c).assign(&ndarray::aview1(rows[i]));
    }
}
