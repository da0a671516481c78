//! Grouped k-means vector quantization.
//!
//! A `D`-dim frame is split into `G` contiguous slices of `D/G` dims and
//! each slice is quantized against its own `V`-entry codebook. The tuple of
//! group indices is a [`GroupedToken`]; the tokens actually observed in a
//! corpus are densely re-indexed by a [`TokenVocabulary`].

mod codebook;
pub mod kmeans;
mod vocab;

pub use codebook::{train_codebook, Codebook, GroupedToken, CODEBOOK_MAGIC, CODEBOOK_VERSION};
pub use kmeans::{kmeans, nearest, KMeansConfig, KMeansFit};
pub use vocab::TokenVocabulary;
