//! Autoregressive decoding over a closed token vocabulary.
//!
//! A [`StepModel`] maps a BOS-initial history to a distribution over the
//! whole vocabulary, BOS included. Decoders never emit BOS and run for a
//! fixed number of steps; there is no end-of-sequence token.

mod beam;
mod markov;
mod topk;

use serde::{Deserialize, Serialize};

pub use beam::{beam_search, greedy_decode, rescore};
pub use markov::{train_markov, MarkovModel};
pub use topk::top_k;

use crate::error::{Error, Result};

pub type TokenId = u32;

/// Tolerance on `Σ p = 1` before a decoder rejects a distribution.
pub const DIST_TOLERANCE: f64 = 1e-6;

pub trait StepModel: Sync {
    /// Vocabulary size including BOS.
    fn vocab_size(&self) -> usize;

    /// Reserved start token; the last id by convention.
    fn bos(&self) -> TokenId {
        (self.vocab_size() - 1) as TokenId
    }

    /// Writes `P(· | history)` into `out` (length `vocab_size`). `history`
    /// always starts with BOS.
    fn next_dist(&self, history: &[TokenId], out: &mut [f64]);
}

impl<M: StepModel + ?Sized> StepModel for &M {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn bos(&self) -> TokenId {
        (**self).bos()
    }

    fn next_dist(&self, history: &[TokenId], out: &mut [f64]) {
        (**self).next_dist(history, out)
    }
}

/// A decoded sequence. `tokens[0]` is BOS; `log_prob` is the natural-log
/// probability of the remaining tokens under the model that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub log_prob: f64,
}

impl Hypothesis {
    /// Tokens after BOS.
    pub fn emitted(&self) -> &[TokenId] {
        &self.tokens[1..]
    }
}

pub(crate) fn validate_dist(step: usize, dist: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidDistribution { step, reason: format!("entry {i} is {p}") });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DIST_TOLERANCE {
        return Err(Error::InvalidDistribution { step, reason: format!("sums to {sum}") });
    }
    Ok(())
}
