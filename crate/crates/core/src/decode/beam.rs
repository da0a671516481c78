use std::cmp::Ordering;

use super::{top_k, validate_dist, Hypothesis, StepModel, TokenId};
use crate::error::{Error, Result};

/// Emits the most probable non-BOS token at every step (lowest id on ties).
pub fn greedy_decode<M: StepModel>(model: &M, length: usize) -> Result<Hypothesis> {
    if length == 0 {
        return Err(Error::InvalidArgument("decode length must be at least 1".into()));
    }
    let bos = model.bos();
    let mut dist = vec![0.0; model.vocab_size()];
    let mut tokens = Vec::with_capacity(length + 1);
    tokens.push(bos);
    let mut log_prob = 0.0;
    for step in 0..length {
        model.next_dist(&tokens, &mut dist);
        validate_dist(step, &dist)?;
        let (tok, p) = top_k(&dist, 1, Some(bos))
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidArgument("vocabulary has no token besides BOS".into()))?;
        tokens.push(tok);
        log_prob += p.ln();
    }
    Ok(Hypothesis { tokens, log_prob })
}

struct Candidate {
    score: f64,
    parent: usize,
    token: TokenId,
}

/// Beam search with `beam` live hypotheses.
///
/// Each step expands every live hypothesis with its `beam` most probable
/// tokens and keeps the best `beam` of the pooled candidates by cumulative
/// log probability. Equal scores are ordered by token sequence. Returns at
/// most `beam` hypotheses, best first; `beam = 1` is [`greedy_decode`].
pub fn beam_search<M: StepModel>(model: &M, length: usize, beam: usize) -> Result<Vec<Hypothesis>> {
    if length == 0 {
        return Err(Error::InvalidArgument("decode length must be at least 1".into()));
    }
    if beam == 0 {
        return Err(Error::InvalidArgument("beam size must be at least 1".into()));
    }
    let bos = model.bos();
    let mut dist = vec![0.0; model.vocab_size()];
    let mut live = vec![Hypothesis { tokens: vec![bos], log_prob: 0.0 }];
    let mut pool: Vec<Candidate> = Vec::with_capacity(beam * beam);

    for step in 0..length {
        pool.clear();
        for (parent, hyp) in live.iter().enumerate() {
            model.next_dist(&hyp.tokens, &mut dist);
            validate_dist(step, &dist)?;
            for (token, p) in top_k(&dist, beam, Some(bos)) {
                pool.push(Candidate { score: hyp.log_prob + p.ln(), parent, token });
            }
        }
        if pool.is_empty() {
            return Err(Error::InvalidArgument("vocabulary has no token besides BOS".into()));
        }

        // Lexicographic rank of the parents for score ties.
        let mut by_seq: Vec<usize> = (0..live.len()).collect();
        by_seq.sort_by(|&a, &b| live[a].tokens.cmp(&live[b].tokens));
        let mut seq_rank = vec![0; live.len()];
        for (rank, &i) in by_seq.iter().enumerate() {
            seq_rank[i] = rank;
        }
        let order = |a: &Candidate, b: &Candidate| -> Ordering {
            b.score
                .total_cmp(&a.score)
                .then(seq_rank[a.parent].cmp(&seq_rank[b.parent]))
                .then(a.token.cmp(&b.token))
        };
        if pool.len() > beam {
            pool.select_nth_unstable_by(beam - 1, order);
            pool.truncate(beam);
        }
        pool.sort_unstable_by(order);

        live = pool
            .iter()
            .map(|c| {
                let parent = &live[c.parent];
                let mut tokens = Vec::with_capacity(parent.tokens.len() + 1);
                tokens.extend_from_slice(&parent.tokens);
                tokens.push(c.token);
                Hypothesis { tokens, log_prob: c.score }
            })
            .collect();
    }
    Ok(live)
}

/// Re-scores `tokens` (BOS-initial) step by step.
pub fn rescore<M: StepModel>(model: &M, tokens: &[TokenId]) -> Result<f64> {
    if tokens.first() != Some(&model.bos()) {
        return Err(Error::InvalidArgument("sequence must start with BOS".into()));
    }
    let mut dist = vec![0.0; model.vocab_size()];
    let mut log_prob = 0.0;
    for t in 1..tokens.len() {
        model.next_dist(&tokens[..t], &mut dist);
        validate_dist(t - 1, &dist)?;
        let p = *dist
            .get(tokens[t] as usize)
            .ok_or(Error::IndexOutOfRange { index: tokens[t] as usize, size: dist.len() })?;
        log_prob += p.ln();
    }
    Ok(log_prob)
}
