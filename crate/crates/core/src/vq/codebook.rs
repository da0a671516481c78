use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2, ArrayView2};

use super::kmeans::{kmeans, nearest, KMeansConfig};
use crate::error::{Error, Result};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"VQCB";
pub const CODEBOOK_VERSION: u32 = 1;

/// `G` per-group codebooks of `V` centroids each, `D/G` dims per centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    groups: usize,
    entries_per_group: usize,
    dim: usize,
    /// One `V × (D/G)` matrix per group.
    centroids: Vec<Array2<f64>>,
    /// Training seed; not part of the binary format.
    pub seed: Option<u64>,
}

/// Per-group centroid indices plus the combined id
/// `Σ_g indices[g] · V^(G−1−g)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroupedToken {
    pub indices: Vec<usize>,
    pub combined_id: u64,
}

impl GroupedToken {
    pub fn from_indices(indices: Vec<usize>, entries_per_group: usize) -> Result<Self> {
        let mut combined: u64 = 0;
        for &i in &indices {
            if i >= entries_per_group {
                return Err(Error::IndexOutOfRange { index: i, size: entries_per_group });
            }
            combined = combined * entries_per_group as u64 + i as u64;
        }
        Ok(Self { indices, combined_id: combined })
    }

    pub fn from_combined(combined_id: u64, groups: usize, entries_per_group: usize) -> Result<Self> {
        let v = entries_per_group as u64;
        let capacity = v.checked_pow(groups as u32).unwrap_or(u64::MAX);
        if combined_id >= capacity {
            return Err(Error::IndexOutOfRange {
                index: combined_id as usize,
                size: capacity as usize,
            });
        }
        let mut indices = vec![0; groups];
        let mut rest = combined_id;
        for slot in indices.iter_mut().rev() {
            *slot = (rest % v) as usize;
            rest /= v;
        }
        Ok(Self { indices, combined_id })
    }
}

impl Codebook {
    pub fn from_centroids(centroids: Vec<Array2<f64>>, seed: Option<u64>) -> Result<Self> {
        let groups = centroids.len();
        if groups == 0 {
            return Err(Error::InvalidArgument("codebook needs at least one group".into()));
        }
        let (v, sub) = centroids[0].dim();
        if v == 0 || sub == 0 {
            return Err(Error::InvalidArgument("empty codebook group".into()));
        }
        for c in &centroids {
            if c.dim() != (v, sub) {
                return Err(Error::DimensionMismatch { expected: v * sub, got: c.len() });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("non-finite centroid".into()));
            }
        }
        Ok(Self {
            groups,
            entries_per_group: v,
            dim: groups * sub,
            centroids: centroids.into_iter().map(|c| c.as_standard_layout().into_owned()).collect(),
            seed,
        })
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn entries_per_group(&self) -> usize {
        self.entries_per_group
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_dim(&self) -> usize {
        self.dim / self.groups
    }

    pub fn group(&self, g: usize) -> ArrayView2<'_, f64> {
        self.centroids[g].view()
    }

    /// Nearest centroid per group by squared Euclidean distance, lowest
    /// index on ties.
    pub fn quantize(&self, frame: &[f64]) -> Result<GroupedToken> {
        if frame.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: frame.len() });
        }
        let sub = self.group_dim();
        let indices = self
            .centroids
            .iter()
            .zip(frame.chunks_exact(sub))
            .map(|(c, slice)| nearest(c.view(), slice).0)
            .collect();
        GroupedToken::from_indices(indices, self.entries_per_group)
    }

    /// Concatenation of the selected centroids in group order.
    pub fn dequantize(&self, token: &GroupedToken) -> Result<Vec<f64>> {
        if token.indices.len() != self.groups {
            return Err(Error::DimensionMismatch { expected: self.groups, got: token.indices.len() });
        }
        let mut out = Vec::with_capacity(self.dim);
        for (c, &i) in self.centroids.iter().zip(&token.indices) {
            if i >= self.entries_per_group {
                return Err(Error::IndexOutOfRange { index: i, size: self.entries_per_group });
            }
            out.extend(c.row(i).iter());
        }
        Ok(out)
    }

    /// Layout: magic `VQCB`, then version, `G`, `V`, `D` as little-endian
    /// `u32`, then every centroid as little-endian `f32`, group-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CODEBOOK_MAGIC)?;
        for v in [CODEBOOK_VERSION, self.groups as u32, self.entries_per_group as u32, self.dim as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for c in &self.centroids {
            for &x in c.iter() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let bad = |message: String| Error::Format { path: "<codebook>".into(), message };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CODEBOOK_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let mut word = [0u8; 4];
        let mut header = [0u32; 4];
        for h in header.iter_mut() {
            r.read_exact(&mut word)?;
            *h = u32::from_le_bytes(word);
        }
        let [version, groups, entries, dim] = header.map(|v| v as usize);
        if version != CODEBOOK_VERSION as usize {
            return Err(bad(format!("unsupported version {version}")));
        }
        if groups == 0 || entries == 0 || dim == 0 || dim % groups != 0 {
            return Err(bad(format!("invalid shape G={groups} V={entries} D={dim}")));
        }
        let sub = dim / groups;
        let mut centroids = Vec::with_capacity(groups);
        for _ in 0..groups {
            let mut vals = Vec::with_capacity(entries * sub);
            for _ in 0..entries * sub {
                r.read_exact(&mut word)?;
                vals.push(f32::from_le_bytes(word) as f64);
            }
            centroids.push(Array2::from_shape_vec((entries, sub), vals).expect("shape"));
        }
        Self::from_centroids(centroids, None)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?)).map_err(|e| match e {
            Error::Format { message, .. } => Error::Format { path: path.to_path_buf(), message },
            other => other,
        })
    }
}

/// Runs k-means independently on each group's `D/G`-dim slice of `frames`
/// (`N × D`). Group `g` is seeded with `seed + g`.
pub fn train_codebook(
    frames: ArrayView2<f64>,
    groups: usize,
    entries_per_group: usize,
    max_iters: usize,
    seed: u64,
) -> Result<Codebook> {
    let (n, d) = frames.dim();
    if groups == 0 || d % groups != 0 {
        return Err(Error::InvalidArgument(format!("dimension {d} not divisible by {groups} groups")));
    }
    if n < entries_per_group {
        return Err(Error::InsufficientData(format!(
            "{n} frames for {entries_per_group} codebook entries"
        )));
    }
    let sub = d / groups;
    let centroids = (0..groups)
        .map(|g| {
            let slice = frames.slice(s![.., g * sub..(g + 1) * sub]);
            let cfg = KMeansConfig {
                k: entries_per_group,
                max_iters,
                seed: seed.wrapping_add(g as u64),
            };
            kmeans(slice, &cfg).map(|fit| fit.centroids)
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::from_centroids(centroids, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_codebook(groups: usize, v: usize, sub: usize, seed: u64) -> Codebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = (0..groups)
            .map(|_| Array2::from_shape_fn((v, sub), |_| rng.gen_range(-4.0..4.0)))
            .collect();
        Codebook::from_centroids(c, None).unwrap()
    }

    #[test]
    fn combined_id_is_base_v() {
        let t = GroupedToken::from_indices(vec![3, 7], 10).unwrap();
        assert_eq!(t.combined_id, 37);
        assert_eq!(GroupedToken::from_combined(37, 2, 10).unwrap(), t);
        assert!(GroupedToken::from_indices(vec![10, 0], 10).is_err());
        assert!(GroupedToken::from_combined(100, 2, 10).is_err());
    }

    #[test]
    fn centroid_concatenation_quantizes_to_itself() {
        let cb = random_codebook(2, 10, 3, 1);
        let mut frame = cb.group(0).row(3).to_vec();
        frame.extend(cb.group(1).row(7).iter());
        assert_eq!(cb.quantize(&frame).unwrap().indices, vec![3, 7]);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let cb = Codebook::from_centroids(vec![array![[1.0], [-1.0], [5.0]]], None).unwrap();
        assert_eq!(cb.quantize(&[0.0]).unwrap().indices, vec![0]);
        let cb = Codebook::from_centroids(vec![array![[-1.0], [1.0]]], None).unwrap();
        assert_eq!(cb.quantize(&[0.0]).unwrap().indices, vec![0]);
    }

    #[test]
    fn random_frames_match_exhaustive_scan() {
        let cb = random_codebook(2, 16, 4, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let frame: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let tok = cb.quantize(&frame).unwrap();
            for g in 0..2 {
                let slice = &frame[g * 4..(g + 1) * 4];
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for v in 0..16 {
                    let d: f64 = (0..4).map(|j| (cb.group(g)[[v, j]] - slice[j]).powi(2)).sum();
                    if d < best_d {
                        best_d = d;
                        best = v;
                    }
                }
                assert_eq!(tok.indices[g], best);
            }
        }
    }

    #[test]
    fn dimension_and_index_errors() {
        let cb = random_codebook(2, 4, 2, 0);
        assert!(matches!(cb.quantize(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
        let bad = GroupedToken { indices: vec![0, 9], combined_id: 9 };
        assert!(matches!(cb.dequantize(&bad), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn train_rejects_bad_shapes() {
        let data = Array2::<f64>::zeros((10, 5));
        assert!(train_codebook(data.view(), 2, 2, 10, 0).is_err());
        let data = Array2::<f64>::zeros((3, 4));
        assert!(matches!(train_codebook(data.view(), 2, 4, 10, 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn grouped_training_recovers_per_group_clusters() {
        // Group 0 separates into blobs near (0,0) and (5,5); group 1 into
        // (-3,1) and (3,-1), independently of group 0.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut sums = [[[0.0; 2]; 2]; 2];
        let mut counts = [[0usize; 2]; 2];
        let g0 = [[0.0, 0.0], [5.0, 5.0]];
        let g1 = [[-3.0, 1.0], [3.0, -1.0]];
        for i in 0..200 {
            let a = i % 2;
            let b = (i / 2) % 2;
            let p: Vec<f64> = (0..2).map(|j| g0[a][j] + rng.gen_range(-0.1..0.1)).collect();
            let q: Vec<f64> = (0..2).map(|j| g1[b][j] + rng.gen_range(-0.1..0.1)).collect();
            for j in 0..2 {
                sums[0][a][j] += p[j];
                sums[1][b][j] += q[j];
            }
            counts[0][a] += 1;
            counts[1][b] += 1;
            rows.extend(p);
            rows.extend(q);
        }
        let data = Array2::from_shape_vec((200, 4), rows).unwrap();
        let cb = train_codebook(data.view(), 2, 2, 50, 11).unwrap();
        for g in 0..2 {
            let mut means: Vec<[f64; 2]> = (0..2)
                .map(|c| [sums[g][c][0] / counts[g][c] as f64, sums[g][c][1] / counts[g][c] as f64])
                .collect();
            let mut got: Vec<[f64; 2]> = cb.group(g).rows().into_iter().map(|r| [r[0], r[1]]).collect();
            means.sort_by(|a, b| a[0].total_cmp(&b[0]));
            got.sort_by(|a, b| a[0].total_cmp(&b[0]));
            for (m, c) in means.iter().zip(&got) {
                assert!((m[0] - c[0]).abs() < 1e-9 && (m[1] - c[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn distortion_radius_bounds_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let data = Array2::from_shape_fn((300, 6), |_| rng.gen_range(-1.0..1.0));
        let cb = train_codebook(data.view(), 2, 8, 30, 5).unwrap();
        // Per-group radius: largest distance from a training slice to its
        // nearest centroid, found by brute force.
        let mut radius = [0.0f64; 2];
        for row in data.rows() {
            for g in 0..2 {
                let slice = &row.as_slice().unwrap()[g * 3..(g + 1) * 3];
                let d = (0..8)
                    .map(|v| (0..3).map(|j| (cb.group(g)[[v, j]] - slice[j]).powi(2)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                radius[g] = radius[g].max(d);
            }
        }
        for row in data.rows() {
            let x = row.to_vec();
            let rec = cb.dequantize(&cb.quantize(&x).unwrap()).unwrap();
            for g in 0..2 {
                let err: f64 = (g * 3..(g + 1) * 3).map(|j| (x[j] - rec[j]).powi(2)).sum::<f64>().sqrt();
                assert!(err <= radius[g] + 1e-12);
            }
            let total: f64 = x.iter().zip(&rec).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(total <= (radius[0].powi(2) + radius[1].powi(2)).sqrt() + 1e-12);
        }
    }

    #[test]
    fn binary_layout() {
        let cb = Codebook::from_centroids(vec![array![[1.0, 2.0]], array![[3.0, 4.0]]], None).unwrap();
        let bytes = cb.to_bytes();
        assert_eq!(&bytes[..4], b"VQCB");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 4);
        assert_eq!(bytes.len(), 20 + 4 * 4);
        assert_eq!(f32::from_le_bytes(bytes[28..32].try_into().unwrap()), 3.0);
        assert_eq!(Codebook::read_from(&bytes[..]).unwrap(), cb);
        let mut corrupt = bytes.clone();
        corrupt[0] = b'X';
        assert!(Codebook::read_from(&corrupt[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trips_on_codewords(seed in any::<u64>(), groups in 1usize..4, v in 1usize..12) {
            let cb = random_codebook(groups, v, 3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let indices: Vec<usize> = (0..groups).map(|_| rng.gen_range(0..v)).collect();
            let tok = GroupedToken::from_indices(indices, v).unwrap();
            let word = cb.dequantize(&tok).unwrap();
            prop_assert_eq!(cb.quantize(&word).unwrap(), tok.clone());
            prop_assert_eq!(cb.dequantize(&cb.quantize(&word).unwrap()).unwrap(), word);
            let back = GroupedToken::from_combined(tok.combined_id, groups, v).unwrap();
            prop_assert_eq!(back, tok);
        }
    }
}
