use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StepModel, TokenId};
use crate::error::{Error, Result};

/// Count-based order-`m` Markov model with additive smoothing:
/// `P(t | h) = (count(h, t) + λ) / (Σ_t' count(h, t') + λ·V)`.
///
/// Histories shorter than `m` are left-padded with BOS, both when counting
/// and when predicting.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    lambda: f64,
    vocab_size: usize,
    table: HashMap<Vec<TokenId>, Row>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Row {
    total: u64,
    counts: Vec<(TokenId, u64)>,
}

#[derive(Serialize, Deserialize)]
struct CountEntry {
    history: Vec<TokenId>,
    next: TokenId,
    count: u64,
}

#[derive(Serialize, Deserialize)]
struct MarkovFile {
    order: usize,
    lambda: f64,
    vocab_size: usize,
    counts: Vec<CountEntry>,
}

impl MarkovModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn context(&self, history: &[TokenId]) -> Vec<TokenId> {
        let bos = self.bos();
        let take = history.len().min(self.order);
        let mut ctx = vec![bos; self.order - take];
        ctx.extend_from_slice(&history[history.len() - take..]);
        ctx
    }

    fn from_counts(order: usize, lambda: f64, vocab_size: usize, counts: BTreeMap<(Vec<TokenId>, TokenId), u64>) -> Self {
        let mut table: HashMap<Vec<TokenId>, Row> = HashMap::new();
        for ((history, next), count) in counts {
            let row = table.entry(history).or_default();
            row.total += count;
            row.counts.push((next, count));
        }
        Self { order, lambda, vocab_size, table }
    }

    fn sorted_counts(&self) -> Vec<CountEntry> {
        let mut entries: Vec<CountEntry> = self
            .table
            .iter()
            .flat_map(|(h, row)| {
                row.counts
                    .iter()
                    .map(move |&(next, count)| CountEntry { history: h.clone(), next, count })
            })
            .collect();
        entries.sort_by(|a, b| a.history.cmp(&b.history).then(a.next.cmp(&b.next)));
        entries
    }

    /// JSON with `order`, `lambda`, `vocab_size` and sparse `counts`
    /// entries sorted by history then next token.
    pub fn to_json(&self) -> Result<String> {
        let file = MarkovFile {
            order: self.order,
            lambda: self.lambda,
            vocab_size: self.vocab_size,
            counts: self.sorted_counts(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MarkovFile = serde_json::from_str(text)?;
        check_params(file.order, file.lambda, file.vocab_size)?;
        let mut counts = BTreeMap::new();
        for e in file.counts {
            if e.history.len() != file.order {
                return Err(Error::InvalidArgument(format!(
                    "history of length {} in an order-{} model",
                    e.history.len(),
                    file.order
                )));
            }
            if e.next as usize >= file.vocab_size || e.history.iter().any(|&t| t as usize >= file.vocab_size) {
                return Err(Error::IndexOutOfRange { index: e.next as usize, size: file.vocab_size });
            }
            *counts.entry((e.history, e.next)).or_insert(0) += e.count;
        }
        Ok(Self::from_counts(file.order, file.lambda, file.vocab_size, counts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl StepModel for MarkovModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_dist(&self, history: &[TokenId], out: &mut [f64]) {
        let v = self.vocab_size as f64;
        match self.table.get(&self.context(history)) {
            None => out.fill(1.0 / v),
            Some(row) => {
                let denom = row.total as f64 + self.lambda * v;
                out.fill(self.lambda / denom);
                for &(t, c) in &row.counts {
                    out[t as usize] = (c as f64 + self.lambda) / denom;
                }
            }
        }
    }
}

fn check_params(order: usize, lambda: f64, vocab_size: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidArgument("Markov order must be at least 1".into()));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("smoothing λ must be positive, got {lambda}")));
    }
    if vocab_size < 2 {
        return Err(Error::InvalidArgument("vocabulary needs BOS and one token".into()));
    }
    Ok(())
}

/// Counts every (history, next) pair in `sequences`. `vocab_size` includes
/// BOS (`vocab_size - 1`), which may not appear inside a sequence.
pub fn train_markov(sequences: &[Vec<TokenId>], order: usize, lambda: f64, vocab_size: usize) -> Result<MarkovModel> {
    check_params(order, lambda, vocab_size)?;
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::InsufficientData("empty training corpus".into()));
    }
    let bos = (vocab_size - 1) as TokenId;
    let mut counts: BTreeMap<(Vec<TokenId>, TokenId), u64> = BTreeMap::new();
    for seq in sequences {
        let mut padded = vec![bos; order];
        padded.extend_from_slice(seq);
        for (i, &next) in seq.iter().enumerate() {
            if next >= bos {
                return Err(Error::IndexOutOfRange { index: next as usize, size: bos as usize });
            }
            *counts.entry((padded[i..i + order].to_vec(), next)).or_insert(0) += 1;
        }
    }
    Ok(MarkovModel::from_counts(order, lambda, vocab_size, counts))
}
