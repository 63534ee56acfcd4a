use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::{Error, Result};

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    align_counts(a, b).cost()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl AlignmentCounts {
    pub fn cost(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    // Minimal cost first; among equal costs, more substitutions.
    fn better_than(&self, other: &Self) -> bool {
        (self.cost(), std::cmp::Reverse(self.substitutions))
            < (other.cost(), std::cmp::Reverse(other.substitutions))
    }
}

/// Aligns `reference` against `hypothesis` and returns the edit counts of a
/// minimal-cost alignment, preferring substitutions over deletion+insertion pairs.
pub fn align_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentCounts {
    let m = hypothesis.len();
    let mut prev: Vec<AlignmentCounts> = (0..=m)
        .map(|j| AlignmentCounts {
            insertions: j,
            ..Default::default()
        })
        .collect();
    let mut cur = vec![AlignmentCounts::default(); m + 1];
    for r in reference {
        cur[0] = AlignmentCounts {
            deletions: prev[0].deletions + 1,
            ..Default::default()
        };
        for j in 1..=m {
            let mut diag = prev[j - 1];
            if *r != hypothesis[j - 1] {
                diag.substitutions += 1;
            }
            let mut del = prev[j];
            del.deletions += 1;
            let mut ins = cur[j - 1];
            ins.insertions += 1;
            let mut best = diag;
            for cand in [del, ins] {
                if cand.better_than(&best) {
                    best = cand;
                }
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    pub wer_percent: f64,
}

/// Corpus WER: per-utterance alignments with counts summed over the corpus.
pub fn wer(refs: &[Sentence], hyps: &[Sentence]) -> Result<WerBreakdown> {
    if refs.len() != hyps.len() {
        return Err(Error::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let ref_len: usize = refs.iter().map(Sentence::len).sum();
    if ref_len == 0 {
        return Err(Error::InvalidArgument("references contain no words".into()));
    }
    let mut total = AlignmentCounts::default();
    for (r, h) in refs.iter().zip(hyps) {
        let c = align_counts(r.tokens(), h.tokens());
        total.substitutions += c.substitutions;
        total.deletions += c.deletions;
        total.insertions += c.insertions;
    }
    Ok(WerBreakdown {
        substitutions: total.substitutions,
        deletions: total.deletions,
        insertions: total.insertions,
        ref_len,
        wer_percent: 100.0 * total.cost() as f64 / ref_len as f64,
    })
}
