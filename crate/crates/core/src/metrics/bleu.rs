use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::{Error, Result};

const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BleuSmoothing {
    #[default]
    None,
    /// Orders with zero matches use `floor / total` as their precision.
    Floor(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub precisions: [f64; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
    pub brevity_penalty: f64,
    pub bleu_percent: f64,
}

impl BleuReport {
    /// Geometric mean of the precisions, as a percentage, without the brevity penalty.
    pub fn without_brevity_penalty(&self) -> f64 {
        100.0 * geometric_mean(&self.precisions)
    }
}

fn geometric_mean(p: &[f64]) -> f64 {
    if p.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    (p.iter().map(|x| x.ln()).sum::<f64>() / p.len() as f64).exp()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Unsmoothed corpus BLEU against a single reference per hypothesis.
pub fn bleu(refs: &[Sentence], hyps: &[Sentence]) -> Result<BleuReport> {
    bleu_with(refs, hyps, BleuSmoothing::None)
}

pub fn bleu_with(refs: &[Sentence], hyps: &[Sentence], smoothing: BleuSmoothing) -> Result<BleuReport> {
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (r, h) in refs.iter().zip(hyps) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            let rc = ngram_counts(r.tokens(), n);
            let hc = ngram_counts(h.tokens(), n);
            for (g, c) in &hc {
                matches[n - 1] += (*c).min(rc.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = match (matches[n], totals[n], smoothing) {
            (_, 0, _) => 0.0,
            (0, t, BleuSmoothing::Floor(f)) => f / t as f64,
            (m, t, _) => m as f64 / t as f64,
        };
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu_percent = 100.0 * brevity_penalty * geometric_mean(&precisions);
    Ok(BleuReport {
        precisions,
        matches,
        totals,
        hyp_len,
        ref_len,
        brevity_penalty,
        bleu_percent,
    })
}
