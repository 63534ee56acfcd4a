use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::ngram::{expand_clitics, join_compound_parts};
use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

/// One decoding result. `total = acoustic + lm_weight * lm + wip * len(words)`
/// under the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Sentence,
    pub acoustic_score: f64,
    pub lm_score: f64,
    pub total: f64,
}

/// Descending total, then lexicographic word sequence.
pub fn rank_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.total.total_cmp(&a.total).then_with(|| a.words.cmp(&b.words))
}

/// Ranked hypotheses of one utterance, best first, word sequences unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBestList {
    pub utterance_id: String,
    pub hyps: Vec<Hypothesis>,
}

impl NBestList {
    /// Sorts, drops repeated word sequences (keeping the better one) and
    /// truncates to `n_best`.
    pub fn from_unsorted(utterance_id: &str, mut hyps: Vec<Hypothesis>, n_best: usize) -> Self {
        hyps.sort_by(rank_order);
        let mut seen = std::collections::HashSet::new();
        hyps.retain(|h| seen.insert(h.words.clone()));
        hyps.truncate(n_best);
        NBestList {
            utterance_id: utterance_id.to_string(),
            hyps,
        }
    }

    pub fn len(&self) -> usize {
        self.hyps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyps.is_empty()
    }

    pub fn best(&self) -> Option<&Hypothesis> {
        self.hyps.first()
    }

    /// Sorted by [`rank_order`] with no repeated word sequence.
    pub fn is_well_formed(&self) -> bool {
        let sorted = self.hyps.windows(2).all(|w| rank_order(&w[0], &w[1]) == Ordering::Less);
        let unique = self
            .hyps
            .iter()
            .map(|h| &h.words)
            .collect::<std::collections::HashSet<_>>()
            .len()
            == self.hyps.len();
        sorted && unique
    }
}

/// Surface text of a hypothesis: clitic tokens split on `#`, marked compound
/// parts joined to the following token.
pub fn expand_output(words: &Sentence) -> Sentence {
    let split = expand_clitics(words);
    Sentence::new(join_compound_parts(split.tokens())).expect("joined tokens are valid")
}

/// One JSON line of an n-best file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NBestRecord {
    pub utt: String,
    pub rank: usize,
    pub words: Vec<String>,
    pub acoustic: f64,
    pub lm: f64,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neural: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescored_total: Option<f64>,
}

pub fn nbest_to_jsonl(lists: &[NBestList]) -> Result<String> {
    let mut s = String::new();
    for list in lists {
        for (i, h) in list.hyps.iter().enumerate() {
            let rec = NBestRecord {
                utt: list.utterance_id.clone(),
                rank: i + 1,
                words: h.words.tokens().to_vec(),
                acoustic: h.acoustic_score,
                lm: h.lm_score,
                total: h.total,
                neural: None,
                rescored_total: None,
            };
            s.push_str(&serde_json::to_string(&rec)?);
            s.push('\n');
        }
    }
    Ok(s)
}

/// Parses n-best JSON lines. Records of one utterance must be contiguous with
/// ranks 1, 2, ...; rescoring fields, if present, are ignored.
pub fn parse_nbest_jsonl(text: &str) -> Result<Vec<NBestList>> {
    const WHAT: &str = "n-best";
    let mut out: Vec<NBestList> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: NBestRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(WHAT, i + 1, e.to_string()))?;
        let words = Sentence::new(rec.words).map_err(|e| Error::parse(WHAT, i + 1, e.to_string()))?;
        let hyp = Hypothesis {
            words,
            acoustic_score: rec.acoustic,
            lm_score: rec.lm,
            total: rec.total,
        };
        match out.last_mut() {
            Some(list) if list.utterance_id == rec.utt => {
                if rec.rank != list.hyps.len() + 1 {
                    return Err(Error::parse(WHAT, i + 1, format!("rank {} out of sequence", rec.rank)));
                }
                list.hyps.push(hyp);
            }
            _ => {
                if rec.rank != 1 {
                    return Err(Error::parse(WHAT, i + 1, "an utterance must start at rank 1"));
                }
                if out.iter().any(|l| l.utterance_id == rec.utt) {
                    return Err(Error::parse(WHAT, i + 1, format!("utterance {} is split", rec.utt)));
                }
                out.push(NBestList {
                    utterance_id: rec.utt,
                    hyps: vec![hyp],
                });
            }
        }
    }
    Ok(out)
}

pub fn read_nbest(path: &Path) -> Result<Vec<NBestList>> {
    parse_nbest_jsonl(&read_to_string(path)?)
}

pub fn write_nbest(path: &Path, lists: &[NBestList]) -> Result<()> {
    write_string(path, &nbest_to_jsonl(lists)?)
}
