use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GroupedToken;
use crate::error::Result;

/// Dense ids for the combined token ids actually observed, assigned in
/// first-occurrence order. The BOS id is `len()`, one past the last
/// observed token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<u64>", into = "Vec<u64>")]
pub struct TokenVocabulary {
    combined: Vec<u64>,
    dense: HashMap<u64, u32>,
}

impl From<Vec<u64>> for TokenVocabulary {
    fn from(ids: Vec<u64>) -> Self {
        let mut vocab = Self { combined: Vec::new(), dense: HashMap::new() };
        for id in ids {
            vocab.insert(id);
        }
        vocab
    }
}

impl From<TokenVocabulary> for Vec<u64> {
    fn from(v: TokenVocabulary) -> Self {
        v.combined
    }
}

impl TokenVocabulary {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a GroupedToken>) -> Self {
        let mut vocab = Self { combined: Vec::new(), dense: HashMap::new() };
        for t in tokens {
            vocab.insert(t.combined_id);
        }
        vocab
    }

    fn insert(&mut self, combined: u64) -> u32 {
        let next = self.combined.len() as u32;
        *self.dense.entry(combined).or_insert_with(|| {
            self.combined.push(combined);
            next
        })
    }

    /// Number of observed tokens (BOS excluded).
    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }

    pub fn bos_id(&self) -> u32 {
        self.combined.len() as u32
    }

    /// Model vocabulary size: observed tokens plus BOS.
    pub fn size_with_bos(&self) -> usize {
        self.combined.len() + 1
    }

    pub fn encode(&self, combined_id: u64) -> Option<u32> {
        self.dense.get(&combined_id).copied()
    }

    pub fn decode(&self, dense_id: u32) -> Option<u64> {
        self.combined.get(dense_id as usize).copied()
    }

    pub fn combined_ids(&self) -> &[u64] {
        &self.combined
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
