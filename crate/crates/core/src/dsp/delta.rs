use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

fn regression(track: ArrayView2<f64>, window: usize) -> Array2<f64> {
    let (t_len, d) = track.dim();
    let norm = 2.0 * (1..=window).map(|w| (w * w) as f64).sum::<f64>();
    let mut out = Array2::zeros((t_len, d));
    for t in 0..t_len {
        for w in 1..=window {
            let ahead = (t + w).min(t_len - 1);
            let behind = t.saturating_sub(w);
            for j in 0..d {
                out[[t, j]] += w as f64 * (track[[ahead, j]] - track[[behind, j]]);
            }
        }
    }
    out / norm
}

/// `[p, Δp, Δ²p]` using the regression formula
/// `Δp_t = Σ_w w (p_{t+w} − p_{t−w}) / (2 Σ_w w²)` with edge frames clamped.
pub fn delta_features(track: ArrayView2<f64>, window: usize) -> Result<Array2<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("delta window must be at least 1".into()));
    }
    if track.nrows() == 0 {
        return Err(Error::InvalidArgument("delta input has no frames".into()));
    }
    let d1 = regression(track, window);
    let d2 = regression(d1.view(), window);
    let base = track.to_owned();
    Ok(concatenate(Axis(1), &[base.view(), d1.view(), d2.view()]).expect("matching row counts"))
}
