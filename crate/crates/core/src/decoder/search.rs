use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::nbest::{Hypothesis, NBestList};
use super::posterior::PosteriorMatrix;
use super::tree::{PrefixTree, ROOT};
use crate::corpus::Sentence;
use crate::lexicon::{Pronunciation, UsageCounts};
use crate::ngram::LmScorer;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Search settings. Scores are log10; `beam_width` is relative to the best
/// token of the current frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub beam_width: f64,
    pub max_active: usize,
    pub n_best: usize,
    pub lm_weight: f64,
    pub word_insertion_penalty: f64,
    pub min_frames_per_phone: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam_width: 10.0,
            max_active: 3000,
            n_best: 100,
            lm_weight: 1.0,
            word_insertion_penalty: 0.0,
            min_frames_per_phone: 1,
        }
    }
}

impl DecoderConfig {
    /// No pruning at all; every word sequence that fits the frames survives.
    pub fn exhaustive() -> Self {
        DecoderConfig {
            beam_width: f64::INFINITY,
            max_active: usize::MAX,
            n_best: usize::MAX,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beam_width > 0.0) {
            return Err(Error::InvalidArgument("beam_width must be positive".into()));
        }
        if self.n_best == 0 || self.max_active == 0 || self.min_frames_per_phone == 0 {
            return Err(Error::InvalidArgument(
                "n_best, max_active and min_frames_per_phone must be at least 1".into(),
            ));
        }
        if !self.lm_weight.is_finite() || !self.word_insertion_penalty.is_finite() {
            return Err(Error::InvalidArgument("lm_weight and word_insertion_penalty must be finite".into()));
        }
        Ok(())
    }

    pub fn total(&self, acoustic: f64, lm: f64, n_words: usize) -> f64 {
        acoustic + self.lm_weight * lm + self.word_insertion_penalty * n_words as f64
    }
}

const NO_PARENT: u32 = u32::MAX;
const END_WORD: u32 = u32::MAX;

/// Interned word histories: id 0 is the empty history.
struct Histories {
    links: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), u32>,
}

impl Histories {
    fn new() -> Self {
        Histories {
            links: vec![(NO_PARENT, NO_PARENT)],
            index: HashMap::new(),
        }
    }

    fn extend(&mut self, h: u32, word: u32) -> u32 {
        let next = self.links.len() as u32;
        *self.index.entry((h, word)).or_insert_with(|| {
            self.links.push((h, word));
            next
        })
    }

    fn words(&self, mut h: u32, limit: usize) -> Vec<u32> {
        let mut out = Vec::new();
        while h != 0 && out.len() < limit {
            let (parent, w) = self.links[h as usize];
            out.push(w);
            h = parent;
        }
        out.reverse();
        out
    }
}

struct LmCache<'a> {
    lm: &'a dyn LmScorer,
    tree: &'a PrefixTree,
    cache: HashMap<(u32, u32), f64>,
}

impl LmCache<'_> {
    fn score(&mut self, hist: &Histories, h: u32, word: u32) -> f64 {
        if let Some(&v) = self.cache.get(&(h, word)) {
            return v;
        }
        let ids = hist.words(h, self.lm.context_len());
        let words: Vec<&str> = ids.iter().map(|&w| self.tree.word(w)).collect();
        let v = if word == END_WORD {
            self.lm.log10_end(&words)
        } else {
            self.lm.log10_prob(&words, self.tree.word(word))
        };
        self.cache.insert((h, word), v);
        v
    }
}

#[derive(Debug, Clone, Copy)]
struct Token {
    node: u32,
    dur: u32,
    hist: u32,
    n_words: u32,
    acoustic: f64,
    lm: f64,
}

type Key = (u32, u32, u32);

fn push(next: &mut HashMap<Key, Token>, tok: Token) {
    if tok.acoustic == f64::NEG_INFINITY {
        return;
    }
    // Equal keys share the word history, hence the LM score: keep the better alignment.
    next.entry((tok.node, tok.dur, tok.hist))
        .and_modify(|t| {
            if tok.acoustic > t.acoustic {
                *t = tok;
            }
        })
        .or_insert(tok);
}

/// Maps tree phone indices to posterior columns.
fn column_map<T: Scalar>(post: &PosteriorMatrix<T>, tree: &PrefixTree) -> Result<Vec<usize>> {
    tree.phone_set()
        .symbols()
        .iter()
        .map(|p| {
            post.phone_set().index_of(p).ok_or_else(|| {
                Error::PhoneSetMismatch(format!("lexicon phone {p:?} missing from the posteriors"))
            })
        })
        .collect()
}

fn log_table<T: Scalar>(post: &PosteriorMatrix<T>, tree: &PrefixTree) -> Result<Vec<Vec<f64>>> {
    let cols = column_map(post, tree)?;
    Ok((0..post.num_frames())
        .map(|t| cols.iter().map(|&c| post.log10(t, c)).collect())
        .collect())
}

/// Frame-synchronous token passing over the prefix tree. Tokens are kept
/// apart by (tree node, frames spent in the current phone, full word
/// history), so the n-best list holds each word sequence with its best
/// alignment.
pub fn decode<T: Scalar>(
    post: &PosteriorMatrix<T>,
    tree: &PrefixTree,
    lm: &dyn LmScorer,
    cfg: &DecoderConfig,
    utterance_id: &str,
) -> Result<NBestList> {
    cfg.validate()?;
    let logp = log_table(post, tree)?;
    if logp.is_empty() {
        return Err(Error::EmptyResult(format!("utterance {utterance_id} has no frames")));
    }
    let min_f = cfg.min_frames_per_phone as u32;
    let mut hist = Histories::new();
    let mut lmc = LmCache {
        lm,
        tree,
        cache: HashMap::new(),
    };
    let root_children: Vec<usize> = tree.nodes[ROOT].children.values().copied().collect();
    let enter = |next: &mut HashMap<Key, Token>, tok: &Token, row: &[f64]| {
        for &c in &root_children {
            push(
                next,
                Token {
                    node: c as u32,
                    dur: 1,
                    acoustic: tok.acoustic + row[tree.nodes[c].phone],
                    ..*tok
                },
            );
        }
    };

    let start = Token {
        node: ROOT as u32,
        dur: 0,
        hist: 0,
        n_words: 0,
        acoustic: 0.0,
        lm: 0.0,
    };
    let mut active: Vec<Token> = Vec::new();
    for (t, row) in logp.iter().enumerate() {
        let mut next: HashMap<Key, Token> = HashMap::new();
        if t == 0 {
            enter(&mut next, &start, row);
        }
        for tok in &active {
            let node = &tree.nodes[tok.node as usize];
            push(
                &mut next,
                Token {
                    dur: (tok.dur + 1).min(min_f),
                    acoustic: tok.acoustic + row[node.phone],
                    ..*tok
                },
            );
            if tok.dur < min_f {
                continue;
            }
            for &c in node.children.values() {
                push(
                    &mut next,
                    Token {
                        node: c as u32,
                        dur: 1,
                        acoustic: tok.acoustic + row[tree.nodes[c].phone],
                        ..*tok
                    },
                );
            }
            for end in &node.ends {
                let lm_word = lmc.score(&hist, tok.hist, end.word);
                let boundary = Token {
                    hist: hist.extend(tok.hist, end.word),
                    n_words: tok.n_words + 1,
                    acoustic: tok.acoustic + end.log10_weight,
                    lm: tok.lm + lm_word,
                    ..*tok
                };
                if boundary.lm == f64::NEG_INFINITY {
                    continue;
                }
                enter(&mut next, &boundary, row);
            }
        }
        active = prune(next, cfg);
        if active.is_empty() {
            return Err(Error::EmptyResult(format!(
                "utterance {utterance_id}: all tokens pruned at frame {t}"
            )));
        }
    }

    let mut finals: HashMap<u32, Token> = HashMap::new();
    for tok in &active {
        if tok.dur < min_f {
            continue;
        }
        for end in &tree.nodes[tok.node as usize].ends {
            let lm_word = lmc.score(&hist, tok.hist, end.word);
            let h = hist.extend(tok.hist, end.word);
            let fin = Token {
                hist: h,
                n_words: tok.n_words + 1,
                acoustic: tok.acoustic + end.log10_weight,
                lm: tok.lm + lm_word + lmc.score(&hist, h, END_WORD),
                ..*tok
            };
            if fin.lm == f64::NEG_INFINITY || fin.acoustic == f64::NEG_INFINITY {
                continue;
            }
            finals
                .entry(h)
                .and_modify(|t| {
                    if fin.acoustic > t.acoustic {
                        *t = fin;
                    }
                })
                .or_insert(fin);
        }
    }
    if finals.is_empty() {
        return Err(Error::EmptyResult(format!(
            "utterance {utterance_id}: no token ends in a complete word"
        )));
    }
    let hyps = finals
        .into_values()
        .map(|tok| {
            let words = hist
                .words(tok.hist, usize::MAX)
                .into_iter()
                .map(|w| tree.word(w).to_string())
                .collect();
            Hypothesis {
                words: Sentence::new(words).expect("lexicon words are valid tokens"),
                acoustic_score: tok.acoustic,
                lm_score: tok.lm,
                total: cfg.total(tok.acoustic, tok.lm, tok.n_words as usize),
            }
        })
        .collect();
    Ok(NBestList::from_unsorted(utterance_id, hyps, cfg.n_best))
}

fn prune(next: HashMap<Key, Token>, cfg: &DecoderConfig) -> Vec<Token> {
    let mut toks: Vec<(f64, Token)> = next
        .into_values()
        .map(|t| (cfg.total(t.acoustic, t.lm, t.n_words as usize), t))
        .collect();
    let best = toks.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    toks.retain(|(s, _)| *s >= best - cfg.beam_width);
    if toks.len() > cfg.max_active {
        toks.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| (a.1.node, a.1.dur, a.1.hist).cmp(&(b.1.node, b.1.dur, b.1.hist)))
        });
        toks.truncate(cfg.max_active);
    } else {
        toks.sort_by_key(|(_, t)| (t.node, t.dur, t.hist));
    }
    toks.into_iter().map(|(_, t)| t).collect()
}

/// Best alignment of a fixed word sequence: its acoustic score (log10
/// posteriors plus log10 pronunciation weights) and the pronunciation chosen
/// for each word.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedAlignment {
    pub acoustic: f64,
    pub prons: Vec<Pronunciation>,
}

/// Viterbi forced alignment with the decoder's topology. `None` when no
/// alignment exists (unknown word, too few frames, zero posteriors).
pub fn forced_align<T: Scalar>(
    post: &PosteriorMatrix<T>,
    tree: &PrefixTree,
    words: &[String],
    min_frames_per_phone: usize,
) -> Result<Option<ForcedAlignment>> {
    let logp = log_table(post, tree)?;
    let min_f = min_frames_per_phone.max(1);
    let mut options: Vec<&[(Pronunciation, f64)]> = Vec::with_capacity(words.len());
    for w in words {
        match tree.pronunciations(w) {
            Some(p) => options.push(p),
            None => return Ok(None),
        }
    }
    if words.is_empty() || logp.is_empty() {
        return Ok(None);
    }
    // State = (word, pron, phone, dur-1).
    let mut states: Vec<(usize, usize, usize, usize)> = Vec::new();
    let mut first: Vec<Vec<usize>> = Vec::new();
    for (i, prons) in options.iter().enumerate() {
        let mut firsts = Vec::new();
        for (j, (p, _)) in prons.iter().enumerate() {
            firsts.push(states.len());
            for k in 0..p.len() {
                for d in 0..min_f {
                    states.push((i, j, k, d));
                }
            }
        }
        first.push(firsts);
    }
    let idx = |i: usize, j: usize, k: usize, d: usize| first[i][j] + k * min_f + d;
    let phone_col = |i: usize, j: usize, k: usize| {
        tree.phone_set()
            .index_of(&options[i][j].0.phones()[k])
            .expect("tree phone")
    };
    let n = states.len();
    let t_len = logp.len();
    let mut score = vec![f64::NEG_INFINITY; n];
    let mut back = vec![vec![usize::MAX; n]; t_len];
    for j in 0..options[0].len() {
        score[idx(0, j, 0, 0)] = logp[0][phone_col(0, j, 0)];
    }
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; n];
        let relax = |next: &mut Vec<f64>, back: &mut Vec<usize>, s: usize, v: f64, from: usize| {
            if v > next[s] {
                next[s] = v;
                back[s] = from;
            }
        };
        for (s, &(i, j, k, d)) in states.iter().enumerate() {
            let cur = score[s];
            if cur == f64::NEG_INFINITY {
                continue;
            }
            let row = &logp[t];
            let stay = idx(i, j, k, (d + 1).min(min_f - 1));
            relax(&mut next, &mut back[t], stay, cur + row[phone_col(i, j, k)], s);
            if d + 1 < min_f {
                continue;
            }
            let len = options[i][j].0.len();
            if k + 1 < len {
                relax(&mut next, &mut back[t], idx(i, j, k + 1, 0), cur + row[phone_col(i, j, k + 1)], s);
            } else if i + 1 < words.len() {
                let w = options[i][j].1.log10();
                for j2 in 0..options[i + 1].len() {
                    relax(
                        &mut next,
                        &mut back[t],
                        idx(i + 1, j2, 0, 0),
                        cur + w + row[phone_col(i + 1, j2, 0)],
                        s,
                    );
                }
            }
        }
        score = next;
    }
    let last = words.len() - 1;
    let mut best: Option<(f64, usize)> = None;
    for j in 0..options[last].len() {
        let s = idx(last, j, options[last][j].0.len() - 1, min_f - 1);
        let v = score[s] + options[last][j].1.log10();
        if v > f64::NEG_INFINITY && best.is_none_or(|(b, _)| v > b) {
            best = Some((v, s));
        }
    }
    let Some((acoustic, mut s)) = best else {
        return Ok(None);
    };
    let mut chosen = vec![0usize; words.len()];
    for t in (0..t_len).rev() {
        let (i, j, _, _) = states[s];
        chosen[i] = j;
        if t > 0 {
            s = back[t][s];
        }
    }
    Ok(Some(ForcedAlignment {
        acoustic,
        prons: chosen
            .iter()
            .enumerate()
            .map(|(i, &j)| options[i][j].0.clone())
            .collect(),
    }))
}

/// Adds one usage per word of the forced alignment of `words` to `usage`.
/// Returns false when the sequence cannot be aligned.
pub fn accumulate_usage<T: Scalar>(
    usage: &mut UsageCounts,
    post: &PosteriorMatrix<T>,
    tree: &PrefixTree,
    words: &[String],
    min_frames_per_phone: usize,
) -> Result<bool> {
    let Some(fa) = forced_align(post, tree, words, min_frames_per_phone)? else {
        return Ok(false);
    };
    for (w, p) in words.iter().zip(fa.prons) {
        *usage.entry((w.clone(), p)).or_insert(0) += 1;
    }
    Ok(true)
}
