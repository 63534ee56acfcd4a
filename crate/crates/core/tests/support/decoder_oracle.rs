//! Brute-force reference for the decoder: every word sequence that fits the
//! frames, each aligned by its own Viterbi pass, ranked like an n-best list.
//! Shared with the workspace acceptance suite.

use dialex::decoder::{DecoderConfig, PosteriorMatrix};
use dialex::ngram::LmScorer;
use dialex::{LexiconEntry, Pronunciation, Sentence};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleHyp {
    pub words: Vec<String>,
    pub acoustic: f64,
    pub lm: f64,
    pub total: f64,
}

/// Best alignment score of one fixed pronunciation sequence: every phone lasts
/// at least `min_f` frames, log10 posteriors are added frame by frame and each
/// word's log10 weight is added when the word is left.
fn viterbi(logp: &[Vec<f64>], phones: &[(usize, Option<f64>)], min_f: usize) -> f64 {
    // state (k, d): in phone k, d+1 frames spent (capped at min_f).
    let n = phones.len();
    let mut cur = vec![f64::NEG_INFINITY; n * min_f];
    cur[0] = logp[0][phones[0].0];
    for row in &logp[1..] {
        let mut next = vec![f64::NEG_INFINITY; n * min_f];
        for k in 0..n {
            for d in 0..min_f {
                let s = cur[k * min_f + d];
                if s == f64::NEG_INFINITY {
                    continue;
                }
                let stay = k * min_f + (d + 1).min(min_f - 1);
                next[stay] = next[stay].max(s + row[phones[k].0]);
                if d + 1 == min_f && k + 1 < n {
                    let leave = match phones[k].1 {
                        Some(w) => s + w,
                        None => s,
                    };
                    let go = (k + 1) * min_f;
                    next[go] = next[go].max(leave + row[phones[k + 1].0]);
                }
            }
        }
        cur = next;
    }
    let end = cur[n * min_f - 1];
    end + phones[n - 1].1.expect("last phone ends a word")
}

/// All ranked hypotheses for `post` under the lexicon, LM and config. Only the
/// config's `lm_weight`, `word_insertion_penalty` and `min_frames_per_phone` matter.
pub fn exhaustive_decode(
    post: &PosteriorMatrix<f64>,
    lex: &[LexiconEntry],
    lm: &dyn LmScorer,
    cfg: &DecoderConfig,
) -> Vec<OracleHyp> {
    let t_len = post.num_frames();
    let min_f = cfg.min_frames_per_phone;
    let col = |p: &str| post.phone_set().index_of(p).expect("phone in posteriors");
    let logp: Vec<Vec<f64>> = post
        .frames()
        .iter()
        .map(|r| r.iter().map(|p| p.log10()).collect())
        .collect();
    let shortest = lex
        .iter()
        .flat_map(|e| e.prons.iter().map(|(p, _)| p.len()))
        .min()
        .unwrap();

    let mut out = Vec::new();
    // Depth-first over word sequences; prune those that cannot fit.
    let mut stack: Vec<Vec<usize>> = (0..lex.len()).map(|i| vec![i]).collect();
    while let Some(seq) = stack.pop() {
        let min_phones: usize = seq
            .iter()
            .map(|&i| lex[i].prons.iter().map(|(p, _)| p.len()).min().unwrap())
            .sum();
        if min_phones * min_f > t_len {
            continue;
        }
        if (min_phones + shortest) * min_f <= t_len {
            for i in 0..lex.len() {
                let mut s = seq.clone();
                s.push(i);
                stack.push(s);
            }
        }
        // Best over every combination of pronunciations.
        let mut best = f64::NEG_INFINITY;
        let mut choice = vec![0usize; seq.len()];
        loop {
            let prons: Vec<(&Pronunciation, f64)> = seq
                .iter()
                .zip(&choice)
                .map(|(&w, &j)| (&lex[w].prons[j].0, lex[w].prons[j].1))
                .collect();
            if prons.iter().map(|(p, _)| p.len()).sum::<usize>() * min_f <= t_len {
                let mut phones = Vec::new();
                for (p, w) in &prons {
                    for (k, ph) in p.phones().iter().enumerate() {
                        let last = k + 1 == p.len();
                        phones.push((col(ph), last.then(|| w.log10())));
                    }
                }
                best = best.max(viterbi(&logp, &phones, min_f));
            }
            // Next pronunciation combination, odometer style.
            let mut k = 0;
            while k < seq.len() {
                choice[k] += 1;
                if choice[k] < lex[seq[k]].prons.len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
            if k == seq.len() {
                break;
            }
        }
        if best == f64::NEG_INFINITY {
            continue;
        }
        let words: Vec<String> = seq.iter().map(|&i| lex[i].word.clone()).collect();
        let lm_score = lm.score_sentence(&Sentence::new(words.clone()).unwrap());
        if lm_score == f64::NEG_INFINITY {
            continue;
        }
        let total = best + cfg.lm_weight * lm_score + cfg.word_insertion_penalty * words.len() as f64;
        out.push(OracleHyp {
            words,
            acoustic: best,
            lm: lm_score,
            total,
        });
    }
    out.sort_by(|a, b| b.total.total_cmp(&a.total).then_with(|| a.words.cmp(&b.words)));
    out
}
