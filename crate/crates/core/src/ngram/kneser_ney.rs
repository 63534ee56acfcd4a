use std::collections::{BTreeMap, HashMap};

use crate::corpus::Sentence;
use crate::{Error, Result};

use super::counts::NGramCounts;
use super::{SENTENCE_END, SENTENCE_START, UNKNOWN};

pub const DEFAULT_DISCOUNT: f64 = 0.75;
/// Unigram probability reserved for the unknown-word symbol.
pub const DEFAULT_UNK_FLOOR: f64 = 1e-7;
/// log10 probability written for entries that are never predicted (the start symbol).
pub(crate) const LOG10_ZERO: f64 = -99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneserNeyOptions {
    pub discount: f64,
    pub unk_floor: f64,
}

impl Default for KneserNeyOptions {
    fn default() -> Self {
        KneserNeyOptions {
            discount: DEFAULT_DISCOUNT,
            unk_floor: DEFAULT_UNK_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub log10_prob: f64,
    pub log10_backoff: Option<f64>,
}

/// Back-off n-gram model with log10 probabilities and back-off weights.
#[derive(Debug, Clone)]
pub struct KneserNeyLm {
    order: usize,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    entries: HashMap<Vec<u32>, Entry>,
    unk: u32,
}

impl KneserNeyLm {
    pub(crate) fn from_parts(order: usize, grams: Vec<(Vec<String>, Entry)>) -> Result<Self> {
        let mut vocab: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let mut intern = |w: &str, vocab: &mut Vec<String>| -> u32 {
            if let Some(&i) = index.get(w) {
                return i;
            }
            let i = vocab.len() as u32;
            vocab.push(w.to_string());
            index.insert(w.to_string(), i);
            i
        };
        let mut entries = HashMap::with_capacity(grams.len());
        for (g, e) in grams {
            let ids: Vec<u32> = g.iter().map(|w| intern(w, &mut vocab)).collect();
            entries.insert(ids, e);
        }
        let unk = intern(UNKNOWN, &mut vocab);
        if !entries.contains_key(&vec![unk]) {
            return Err(Error::InvalidArgument(format!("model lacks a {UNKNOWN} unigram")));
        }
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(KneserNeyLm {
            order,
            vocab,
            index,
            entries,
            unk,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Every word that can be predicted: the vocabulary without the start symbol.
    pub fn predictable_vocab(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .vocab
            .iter()
            .map(String::as_str)
            .filter(|w| *w != SENTENCE_START)
            .collect();
        v.sort_unstable();
        v
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Listed n-grams carrying a back-off weight, i.e. the observed contexts.
    pub fn contexts(&self) -> Vec<Vec<&str>> {
        let mut out: Vec<Vec<&str>> = self
            .entries
            .iter()
            .filter(|(_, e)| e.log10_backoff.is_some())
            .map(|(k, _)| k.iter().map(|&i| self.vocab[i as usize].as_str()).collect())
            .collect();
        out.sort();
        out
    }

    /// Number of listed n-grams per order, index `n - 1`.
    pub fn ngram_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.order];
        for k in self.entries.keys() {
            c[k.len() - 1] += 1;
        }
        c
    }

    /// Listed n-grams sorted by order then by words.
    pub(crate) fn sorted_entries(&self) -> Vec<(Vec<&str>, Entry)> {
        let mut out: Vec<(Vec<&str>, Entry)> = self
            .entries
            .iter()
            .map(|(k, e)| (k.iter().map(|&i| self.vocab[i as usize].as_str()).collect(), *e))
            .collect();
        out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        out
    }

    fn id(&self, w: &str) -> u32 {
        self.index.get(w).copied().unwrap_or(self.unk)
    }

    fn log10_prob_ids(&self, history: &[u32], word: u32) -> f64 {
        let keep = history.len().min(self.order - 1);
        let hist = &history[history.len() - keep..];
        let mut backoff = 0.0;
        let mut key: Vec<u32> = Vec::with_capacity(self.order);
        for start in 0..=hist.len() {
            let ctx = &hist[start..];
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.entries.get(&key) {
                return backoff + e.log10_prob;
            }
            if !ctx.is_empty() {
                if let Some(bo) = self.entries.get(ctx).and_then(|e| e.log10_backoff) {
                    backoff += bo;
                }
            }
        }
        backoff + self.entries[&vec![self.unk]].log10_prob
    }

    /// log10 p(word | history); unknown words score as the unknown symbol.
    pub fn log10_prob(&self, history: &[&str], word: &str) -> f64 {
        let h: Vec<u32> = history.iter().map(|w| self.id(w)).collect();
        self.log10_prob_ids(&h, self.id(word))
    }

    /// Total log10 probability of a sentence including the end symbol.
    pub fn score_sentence(&self, sentence: &Sentence) -> f64 {
        let mut hist: Vec<u32> = vec![self.id(SENTENCE_START); self.order.saturating_sub(1)];
        let mut total = 0.0;
        for w in sentence {
            let id = self.id(w);
            total += self.log10_prob_ids(&hist, id);
            hist.push(id);
        }
        total + self.log10_prob_ids(&hist, self.id(SENTENCE_END))
    }
}

/// Interpolated Kneser-Ney with one fixed discount for every order.
pub fn estimate_kneser_ney(counts: &NGramCounts, discount: f64) -> Result<KneserNeyLm> {
    estimate_kneser_ney_with(
        counts,
        KneserNeyOptions {
            discount,
            ..Default::default()
        },
    )
}

pub fn estimate_kneser_ney_with(counts: &NGramCounts, opts: KneserNeyOptions) -> Result<KneserNeyLm> {
    let d = opts.discount;
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InvalidArgument(format!("discount {d} outside (0,1)")));
    }
    if !(opts.unk_floor > 0.0 && opts.unk_floor < 1.0) {
        return Err(Error::InvalidArgument("unk_floor must be in (0,1)".into()));
    }
    if counts.is_empty() {
        return Err(Error::EmptyCounts);
    }
    let order = counts.order();

    // Adjusted counts: raw for the top order and for n-grams starting with <s>,
    // continuation counts (distinct left extensions) otherwise.
    let mut adjusted: Vec<BTreeMap<Vec<String>, u64>> = Vec::with_capacity(order);
    for n in 1..=order {
        let mut m = BTreeMap::new();
        for (g, c) in counts.iter_order(n) {
            m.insert(g.to_vec(), c);
        }
        if n < order {
            let mut cont: BTreeMap<&[String], u64> = BTreeMap::new();
            for (g, _) in counts.iter_order(n + 1) {
                *cont.entry(&g[1..]).or_insert(0) += 1;
            }
            for (g, c) in m.iter_mut() {
                if g[0] != SENTENCE_START {
                    if let Some(&k) = cont.get(g.as_slice()) {
                        *c = k;
                    }
                }
            }
        }
        adjusted.push(m);
    }

    // probs[n-1][g] = interpolated probability of the last word of g given the rest.
    let mut probs: Vec<BTreeMap<Vec<String>, f64>> = Vec::with_capacity(order);
    let mut gammas: Vec<BTreeMap<Vec<String>, f64>> = vec![BTreeMap::new(); order];

    let uni_total: u64 = adjusted[0].values().sum();
    let mut unigrams = BTreeMap::new();
    for (g, &a) in &adjusted[0] {
        unigrams.insert(g.clone(), (1.0 - opts.unk_floor) * a as f64 / uni_total as f64);
    }
    *unigrams.entry(vec![UNKNOWN.to_string()]).or_insert(0.0) += opts.unk_floor;
    probs.push(unigrams);

    for n in 2..=order {
        let mut denom: BTreeMap<&[String], (u64, u64)> = BTreeMap::new();
        for (g, &a) in &adjusted[n - 1] {
            let e = denom.entry(&g[..n - 1]).or_insert((0, 0));
            e.0 += a;
            e.1 += 1;
        }
        let mut level = BTreeMap::new();
        for (g, &a) in &adjusted[n - 1] {
            let ctx = &g[..n - 1];
            let (total, types) = denom[ctx];
            let gamma = d * types as f64 / total as f64;
            let lower = lower_prob(&probs, &gammas, &g[1..]);
            level.insert(g.clone(), (a as f64 - d) / total as f64 + gamma * lower);
        }
        for (ctx, (total, types)) in denom {
            gammas[n - 2].insert(ctx.to_vec(), d * types as f64 / total as f64);
        }
        probs.push(level);
    }

    let mut grams: Vec<(Vec<String>, Entry)> = Vec::new();
    for (n, level) in probs.iter().enumerate() {
        for (g, &p) in level {
            grams.push((
                g.clone(),
                Entry {
                    log10_prob: p.log10(),
                    log10_backoff: gammas[n].get(g).map(|gm| gm.log10()),
                },
            ));
        }
    }
    // Contexts that end in <s> are never counted as n-grams but need their weights.
    for (n, level) in gammas.iter().enumerate() {
        for (ctx, gm) in level {
            if !probs[n].contains_key(ctx) {
                grams.push((
                    ctx.clone(),
                    Entry {
                        log10_prob: LOG10_ZERO,
                        log10_backoff: Some(gm.log10()),
                    },
                ));
            }
        }
    }
    KneserNeyLm::from_parts(order, grams)
}

// Interpolated probability of the last word of `g` given its prefix, backing off
// through shorter contexts when `g` itself is not observed.
fn lower_prob(
    probs: &[BTreeMap<Vec<String>, f64>],
    gammas: &[BTreeMap<Vec<String>, f64>],
    g: &[String],
) -> f64 {
    let n = g.len();
    if let Some(&p) = probs[n - 1].get(g) {
        return p;
    }
    if n == 1 {
        return probs[0][&vec![UNKNOWN.to_string()]];
    }
    let gamma = gammas[n - 2].get(&g[..n - 1]).copied().unwrap_or(1.0);
    gamma * lower_prob(probs, gammas, &g[1..])
}

/// `10^(-total log10 prob / tokens)`, end symbols counted as tokens.
pub fn perplexity(lm: &KneserNeyLm, corpus: &[Sentence]) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("perplexity of an empty corpus".into()));
    }
    let total: f64 = corpus.iter().map(|s| lm.score_sentence(s)).sum();
    let tokens: usize = corpus.iter().map(|s| s.len() + 1).sum();
    Ok(10f64.powf(-total / tokens as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::ngram::count_ngrams;
    use approx::assert_abs_diff_eq;

    fn train(text: &[&str], order: usize) -> KneserNeyLm {
        let corpus: Vec<Sentence> = text.iter().map(|t| tokenize(t)).collect();
        estimate_kneser_ney(&count_ngrams(&corpus, order).unwrap(), 0.75).unwrap()
    }

    fn context_mass(lm: &KneserNeyLm, ctx: &[&str]) -> f64 {
        lm.predictable_vocab()
            .iter()
            .map(|w| 10f64.powf(lm.log10_prob(ctx, w)))
            .sum()
    }

    #[test]
    fn hand_computed_bigram() {
        // <s> a b a b a </s>, D = 0.75
        let lm = train(&["a b a b a"], 2);
        let f = DEFAULT_UNK_FLOOR;
        // continuation counts: a <- {<s>, b} = 2, b <- {a} = 1, </s> <- {a} = 1
        let uni = |c: f64| (1.0 - f) * c / 4.0;
        // context a: c(a b) = 2, c(a </s>) = 1, total 3, two types
        let gamma_a = 0.75 * 2.0 / 3.0;
        let p_b_a = (2.0 - 0.75) / 3.0 + gamma_a * uni(1.0);
        // context b: c(b a) = 2, total 2, one type
        let gamma_b = 0.75 * 1.0 / 2.0;
        let p_a_b = (2.0 - 0.75) / 2.0 + gamma_b * uni(2.0);
        assert_abs_diff_eq!(lm.log10_prob(&["a"], "b"), p_b_a.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(lm.log10_prob(&["b"], "a"), p_a_b.log10(), epsilon = 1e-12);
        // unseen continuation backs off: p(b|b) = gamma_b * p(b)
        assert_abs_diff_eq!(lm.log10_prob(&["b"], "b"), (gamma_b * uni(1.0)).log10(), epsilon = 1e-12);
        let bows: HashMap<Vec<&str>, f64> = lm
            .sorted_entries()
            .into_iter()
            .filter_map(|(k, e)| e.log10_backoff.map(|b| (k, b)))
            .collect();
        assert_abs_diff_eq!(bows[&vec!["a"]], gamma_a.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(bows[&vec!["b"]], gamma_b.log10(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_corpus_normalizes() {
        let lm = train(&["x x x", "x", "x x"], 2);
        for ctx in [vec![], vec!["x"], vec!["<s>"]] {
            assert_abs_diff_eq!(context_mass(&lm, &ctx), 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn every_context_normalizes() {
        let lm = train(&["a b c a", "b b a c", "c a b", "a"], 3);
        for ctx in lm.contexts() {
            assert_abs_diff_eq!(context_mass(&lm, &ctx), 1.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(context_mass(&lm, &["zz", "qq"]), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_counts_and_bad_discount() {
        let empty = count_ngrams(&[], 2).unwrap();
        assert!(matches!(estimate_kneser_ney(&empty, 0.75), Err(Error::EmptyCounts)));
        let c = count_ngrams(&[tokenize("a")], 2).unwrap();
        assert!(estimate_kneser_ney(&c, 1.0).is_err());
        assert!(estimate_kneser_ney(&c, 0.0).is_err());
    }

    #[test]
    fn uniform_unigram_perplexity() {
        let lm = train(&["a b c"], 1);
        let corpus = vec![tokenize("a b c"), tokenize("c b a")];
        let ppl = perplexity(&lm, &corpus).unwrap();
        // a, b, c and </s> each have probability (1 - floor) / 4
        assert_abs_diff_eq!(ppl, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn single_sentence_perplexity_matches_hand_sum() {
        let lm = train(&["a b a b a", "b a"], 2);
        let s = tokenize("a b");
        let total = lm.log10_prob(&["<s>"], "a") + lm.log10_prob(&["a"], "b") + lm.log10_prob(&["b"], "</s>");
        let ppl = perplexity(&lm, &[s]).unwrap();
        assert_abs_diff_eq!(ppl, 10f64.powf(-total / 3.0), epsilon = 1e-12);
    }

    #[test]
    fn removing_word_never_raises_unigram() {
        let with = train(&["a b c", "a c", "b b c"], 2);
        let without = train(&["a c", "a c", "c"], 2);
        assert!(without.log10_prob(&[], "b") <= with.log10_prob(&[], "b"));
    }
}
