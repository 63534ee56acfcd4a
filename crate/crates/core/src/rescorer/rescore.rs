use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lstm::LstmLm;
use crate::corpus::Sentence;
use crate::decoder::{expand_output, Hypothesis, NBestList, NBestRecord};
use crate::metrics::wer;
use crate::scalar::Scalar;
use crate::util::write_string;
use crate::{Error, Result};

/// Log-linear combination weights for second-pass scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            alpha: 1.0,
            beta: 0.5,
            gamma: 0.5,
        }
    }
}

impl ScoreWeights {
    pub fn combine(&self, acoustic: f64, lm: f64, neural: f64) -> f64 {
        self.alpha * acoustic + self.beta * lm + self.gamma * neural
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescoredHypothesis {
    pub hyp: Hypothesis,
    /// 1-based rank in the first-pass list.
    pub original_rank: usize,
    /// log10 probability of the expanded words under the neural LM.
    pub neural: f64,
    pub rescored_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RescoredNBest {
    pub utterance_id: String,
    pub hyps: Vec<RescoredHypothesis>,
}

impl RescoredNBest {
    pub fn best(&self) -> Option<&RescoredHypothesis> {
        self.hyps.first()
    }

    /// The hypotheses in their new order.
    pub fn to_nbest(&self) -> NBestList {
        NBestList {
            utterance_id: self.utterance_id.clone(),
            hyps: self.hyps.iter().map(|r| r.hyp.clone()).collect(),
        }
    }

    /// Re-ranks with other weights, reusing the stored neural scores.
    pub fn reweighted(&self, w: &ScoreWeights) -> RescoredNBest {
        let mut hyps: Vec<RescoredHypothesis> = self
            .hyps
            .iter()
            .map(|r| RescoredHypothesis {
                rescored_total: w.combine(r.hyp.acoustic_score, r.hyp.lm_score, r.neural),
                ..r.clone()
            })
            .collect();
        sort_rescored(&mut hyps);
        RescoredNBest {
            utterance_id: self.utterance_id.clone(),
            hyps,
        }
    }
}

fn sort_rescored(hyps: &mut [RescoredHypothesis]) {
    hyps.sort_by(|a, b| {
        b.rescored_total
            .total_cmp(&a.rescored_total)
            .then_with(|| a.original_rank.cmp(&b.original_rank))
    });
}

/// Scores every hypothesis as `alpha * acoustic + beta * lm + gamma * neural`,
/// where `neural` is the LSTM log10 probability of the expanded surface words,
/// and sorts by the new total (ties keep the first-pass order).
pub fn rescore_nbest<T: Scalar>(nbest: &NBestList, model: &LstmLm<T>, w: &ScoreWeights) -> Result<RescoredNBest> {
    if nbest.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "n-best list of {} is empty",
            nbest.utterance_id
        )));
    }
    let mut hyps: Vec<RescoredHypothesis> = nbest
        .hyps
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let neural = model.log10_prob(&expand_output(&h.words));
            RescoredHypothesis {
                hyp: h.clone(),
                original_rank: i + 1,
                neural,
                rescored_total: w.combine(h.acoustic_score, h.lm_score, neural),
            }
        })
        .collect();
    sort_rescored(&mut hyps);
    Ok(RescoredNBest {
        utterance_id: nbest.utterance_id.clone(),
        hyps,
    })
}

/// N-best JSON lines with the `neural` and `rescored_total` fields filled in.
pub fn rescored_to_jsonl(lists: &[RescoredNBest]) -> Result<String> {
    let mut s = String::new();
    for list in lists {
        for (i, r) in list.hyps.iter().enumerate() {
            let rec = NBestRecord {
                utt: list.utterance_id.clone(),
                rank: i + 1,
                words: r.hyp.words.tokens().to_vec(),
                acoustic: r.hyp.acoustic_score,
                lm: r.hyp.lm_score,
                total: r.hyp.total,
                neural: Some(r.neural),
                rescored_total: Some(r.rescored_total),
            };
            s.push_str(&serde_json::to_string(&rec)?);
            s.push('\n');
        }
    }
    Ok(s)
}

pub fn write_rescored(path: &Path, lists: &[RescoredNBest]) -> Result<()> {
    write_string(path, &rescored_to_jsonl(lists)?)
}

/// Grid search over `grid` for the weights with the lowest corpus WER of the
/// expanded rank-1 hypotheses against `refs`. Earlier grid points win ties.
pub fn tune_weights(
    lists: &[RescoredNBest],
    refs: &[Sentence],
    grid: &[ScoreWeights],
) -> Result<(ScoreWeights, f64)> {
    if lists.len() != refs.len() {
        return Err(Error::LengthMismatch {
            refs: refs.len(),
            hyps: lists.len(),
        });
    }
    let mut best: Option<(ScoreWeights, f64)> = None;
    for w in grid {
        let hyps: Vec<Sentence> = lists
            .iter()
            .map(|l| expand_output(&l.reweighted(w).hyps[0].hyp.words))
            .collect();
        let score = wer(refs, &hyps)?.wer_percent;
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((*w, score));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty weight grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn hyp(words: &str, ac: f64, lm: f64) -> Hypothesis {
        Hypothesis {
            words: tokenize(words),
            acoustic_score: ac,
            lm_score: lm,
            total: ac + lm,
        }
    }

    fn model() -> LstmLm<f64> {
        LstmLm::new(["a", "b", "c"], 3, 4, 9).unwrap()
    }

    #[test]
    fn gamma_zero_keeps_order() {
        let list = NBestList::from_unsorted("u", vec![hyp("a b", -1.0, -2.0), hyp("b a", -1.5, -2.0), hyp("c", -4.0, -0.1)], 10);
        let w = ScoreWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.0,
        };
        let r = rescore_nbest(&list, &model(), &w).unwrap();
        let ranks: Vec<usize> = r.hyps.iter().map(|h| h.original_rank).collect();
        assert_eq!(ranks, [1, 2, 3]);
    }

    #[test]
    fn hand_combination() {
        let m = model();
        let list = NBestList::from_unsorted("u", vec![hyp("a", -1.0, -2.0), hyp("b", -1.2, -2.5), hyp("a#b", -3.0, -1.0)], 10);
        let w = ScoreWeights::default();
        let r = rescore_nbest(&list, &m, &w).unwrap();
        for h in &r.hyps {
            let n = m.log10_prob(&expand_output(&h.hyp.words));
            assert_eq!(h.neural, n);
            assert_eq!(h.rescored_total, h.hyp.acoustic_score + 0.5 * h.hyp.lm_score + 0.5 * n);
        }
        assert!(r.hyps.windows(2).all(|p| p[0].rescored_total >= p[1].rescored_total));
        let neural_only = rescore_nbest(
            &list,
            &m,
            &ScoreWeights {
                alpha: 0.0,
                beta: 0.0,
                gamma: 1.0,
            },
        )
        .unwrap();
        assert!(neural_only.hyps.windows(2).all(|p| p[0].neural >= p[1].neural));
        assert!(rescore_nbest(&NBestList::from_unsorted("e", vec![], 1), &m, &w).is_err());
    }
}
