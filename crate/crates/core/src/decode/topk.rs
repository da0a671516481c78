use super::TokenId;

/// The `k` most probable tokens, most probable first, lowest id first among
/// equals, skipping `exclude`.
///
/// A single pass keeps a sorted buffer of at most `k` entries, so the cost
/// is linear in the vocabulary for small `k` and nothing is fully sorted.
pub fn top_k(dist: &[f64], k: usize, exclude: Option<TokenId>) -> Vec<(TokenId, f64)> {
    let mut best: Vec<(TokenId, f64)> = Vec::with_capacity(k + 1);
    if k == 0 {
        return best;
    }
    for (i, &p) in dist.iter().enumerate() {
        let id = i as TokenId;
        if Some(id) == exclude {
            continue;
        }
        if best.len() == k && p <= best[k - 1].1 {
            continue;
        }
        let at = best.partition_point(|&(_, q)| q >= p);
        best.insert(at, (id, p));
        best.truncate(k);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_and_exclusion() {
        let d = [0.1, 0.3, 0.3, 0.2, 0.1];
        assert_eq!(top_k(&d, 2, None), vec![(1, 0.3), (2, 0.3)]);
        assert_eq!(top_k(&d, 2, Some(1)), vec![(2, 0.3), (3, 0.2)]);
        assert_eq!(top_k(&d, 10, Some(4)).len(), 4);
        assert!(top_k(&d, 0, None).is_empty());
    }

    proptest! {
        #[test]
        fn agrees_with_full_sort(d in proptest::collection::vec(0u8..5, 1..60), k in 1usize..12) {
            let dist: Vec<f64> = d.iter().map(|&v| v as f64).collect();
            let mut all: Vec<(TokenId, f64)> = dist.iter().enumerate().map(|(i, &p)| (i as TokenId, p)).collect();
            all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(top_k(&dist, k, None), all);
        }
    }
}
