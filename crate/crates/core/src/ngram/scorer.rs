use std::collections::HashMap;

use crate::corpus::Sentence;

use super::clitic::{split_clitic, CliticTable};
use super::compound::CompoundSplitter;
use super::kneser_ney::KneserNeyLm;
use super::SENTENCE_END;

/// Word-level LM interface used by the decoder and the rescorer.
pub trait LmScorer: Send + Sync {
    /// How many preceding words can influence a prediction.
    fn context_len(&self) -> usize;

    /// log10 p(word | history). `history` holds the preceding words of the
    /// sentence in order (without start padding) and may be longer than
    /// [`context_len`](Self::context_len).
    fn log10_prob(&self, history: &[&str], word: &str) -> f64;

    fn log10_end(&self, history: &[&str]) -> f64 {
        self.log10_prob(history, SENTENCE_END)
    }

    /// Sum of per-word log10 probabilities plus the end of sentence.
    fn score_sentence(&self, sentence: &Sentence) -> f64 {
        let words: Vec<&str> = sentence.iter().map(String::as_str).collect();
        let mut total = 0.0;
        for i in 0..words.len() {
            total += self.log10_prob(&words[..i], words[i]);
        }
        total + self.log10_end(&words)
    }
}

fn padded_history<'a>(lm: &KneserNeyLm, history: &[&'a str]) -> Vec<&'a str> {
    let need = lm.order() - 1;
    let keep = history.len().min(need);
    let mut h = vec![super::SENTENCE_START; need - keep];
    h.extend_from_slice(&history[history.len() - keep..]);
    h
}

impl LmScorer for KneserNeyLm {
    fn context_len(&self) -> usize {
        self.order() - 1
    }

    fn log10_prob(&self, history: &[&str], word: &str) -> f64 {
        KneserNeyLm::log10_prob(self, &padded_history(self, history), word)
    }
}

// Chain probability of `tokens` given `history`, both in the LM's tokenization.
fn chain_log10(lm: &KneserNeyLm, history: &[String], tokens: &[String]) -> f64 {
    let mut h: Vec<&str> = history.iter().map(String::as_str).collect();
    let mut total = 0.0;
    for t in tokens {
        total += LmScorer::log10_prob(lm, &h, t);
        h.push(t);
    }
    total
}

/// Per-word mapping into LM tokens: compound splitting and, for the unmerged
/// view, clitic expansion.
#[derive(Debug, Clone, Default)]
struct TokenMapper {
    splitter: Option<CompoundSplitter>,
    cache: HashMap<String, (Vec<String>, Vec<String>)>,
}

impl TokenMapper {
    fn new(splitter: Option<CompoundSplitter>, vocabulary: &[&str]) -> Self {
        let mut m = TokenMapper {
            splitter,
            cache: HashMap::new(),
        };
        let cache = vocabulary
            .iter()
            .map(|w| (w.to_string(), m.compute(w)))
            .collect();
        m.cache = cache;
        m
    }

    fn split(&self, w: &str) -> Vec<String> {
        match &self.splitter {
            Some(sp) => sp.split_word(w),
            None => vec![w.to_string()],
        }
    }

    // (merged view, unmerged view)
    fn compute(&self, w: &str) -> (Vec<String>, Vec<String>) {
        let parts = split_clitic(w);
        let merged = if parts.len() > 1 { vec![w.to_string()] } else { self.split(w) };
        let unmerged = parts.iter().flat_map(|p| self.split(p)).collect();
        (merged, unmerged)
    }

    fn map(&self, w: &str) -> (Vec<String>, Vec<String>) {
        match self.cache.get(w) {
            Some(v) => v.clone(),
            None => self.compute(w),
        }
    }

    fn history(&self, history: &[&str], merged: bool) -> Vec<String> {
        history
            .iter()
            .flat_map(|w| {
                let (m, u) = self.map(w);
                if merged {
                    m
                } else {
                    u
                }
            })
            .collect()
    }
}

/// A single LM whose words are decompounded (and clitic tokens expanded)
/// before scoring; a word's probability is the chain product over its tokens.
#[derive(Debug, Clone)]
pub struct ExpandingScorer<'a> {
    lm: &'a KneserNeyLm,
    mapper: TokenMapper,
}

impl<'a> ExpandingScorer<'a> {
    /// `vocabulary` pre-computes the token mapping for words that will be queried often.
    pub fn new(lm: &'a KneserNeyLm, splitter: Option<CompoundSplitter>, vocabulary: &[&str]) -> Self {
        ExpandingScorer {
            lm,
            mapper: TokenMapper::new(splitter, vocabulary),
        }
    }
}

impl LmScorer for ExpandingScorer<'_> {
    fn context_len(&self) -> usize {
        self.lm.order() - 1
    }

    fn log10_prob(&self, history: &[&str], word: &str) -> f64 {
        let h = self.mapper.history(history, false);
        let (_, tokens) = self.mapper.map(word);
        chain_log10(self.lm, &h, &tokens)
    }

    fn log10_end(&self, history: &[&str]) -> f64 {
        let h = self.mapper.history(history, false);
        chain_log10(self.lm, &h, &[SENTENCE_END.to_string()])
    }
}

/// Linear interpolation, per word, of a clitic-merged LM and the unmerged LM:
/// `λ·p_merged(w | h) + (1-λ)·p_unmerged(parts(w) | expanded h)`.
#[derive(Debug, Clone)]
pub struct InterpolatedScorer<'a> {
    merged: &'a KneserNeyLm,
    unmerged: &'a KneserNeyLm,
    lambda: f64,
    mapper: TokenMapper,
}

impl<'a> InterpolatedScorer<'a> {
    pub fn new(
        merged: &'a KneserNeyLm,
        unmerged: &'a KneserNeyLm,
        clitics: &CliticTable,
        splitter: Option<CompoundSplitter>,
        vocabulary: &[&str],
    ) -> Self {
        InterpolatedScorer {
            merged,
            unmerged,
            lambda: clitics.lambda(),
            mapper: TokenMapper::new(splitter, vocabulary),
        }
    }

    fn mix(&self, merged: f64, unmerged: f64) -> f64 {
        let l = self.lambda;
        let p = l * 10f64.powf(merged) + (1.0 - l) * 10f64.powf(unmerged);
        crate::util::log10(p)
    }
}

impl LmScorer for InterpolatedScorer<'_> {
    fn context_len(&self) -> usize {
        self.merged.order().max(self.unmerged.order()) - 1
    }

    fn log10_prob(&self, history: &[&str], word: &str) -> f64 {
        let (m_tokens, u_tokens) = self.mapper.map(word);
        let m = chain_log10(self.merged, &self.mapper.history(history, true), &m_tokens);
        let u = chain_log10(self.unmerged, &self.mapper.history(history, false), &u_tokens);
        self.mix(m, u)
    }

    fn log10_end(&self, history: &[&str]) -> f64 {
        let end = [SENTENCE_END.to_string()];
        let m = chain_log10(self.merged, &self.mapper.history(history, true), &end);
        let u = chain_log10(self.unmerged, &self.mapper.history(history, false), &end);
        self.mix(m, u)
    }
}

/// Interpolated log10 score of a sentence given in merged tokenization.
pub fn score_interpolated(
    merged_lm: &KneserNeyLm,
    unmerged_lm: &KneserNeyLm,
    clitics: &CliticTable,
    sentence: &Sentence,
) -> f64 {
    InterpolatedScorer::new(merged_lm, unmerged_lm, clitics, None, &[]).score_sentence(sentence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use crate::ngram::{count_ngrams, estimate_kneser_ney, expand_clitics, merge_clitics_in_corpus};
    use approx::assert_abs_diff_eq;

    fn corpus() -> Vec<Sentence> {
        ["haben wir gesagt", "wir haben es gesagt", "haben wir es", "es ist gesagt"]
            .iter()
            .map(|t| tokenize(t))
            .collect()
    }

    fn models(lambda: f64) -> (KneserNeyLm, KneserNeyLm, CliticTable) {
        let table = CliticTable::new(["haben#wir"], lambda).unwrap();
        let merged = merge_clitics_in_corpus(&corpus(), &table);
        let m = estimate_kneser_ney(&count_ngrams(&merged, 3).unwrap(), 0.75).unwrap();
        let u = estimate_kneser_ney(&count_ngrams(&corpus(), 3).unwrap(), 0.75).unwrap();
        (m, u, table)
    }

    #[test]
    fn lambda_zero_is_unmerged() {
        let (m, u, t) = models(0.0);
        let s = tokenize("haben#wir gesagt");
        assert_abs_diff_eq!(
            score_interpolated(&m, &u, &t, &s),
            u.score_sentence(&expand_clitics(&s)),
            epsilon = 1e-9
        );
    }

    #[test]
    fn lambda_one_is_merged() {
        let (m, u, t) = models(1.0);
        let s = tokenize("es ist gesagt");
        assert_abs_diff_eq!(score_interpolated(&m, &u, &t, &s), m.score_sentence(&s), epsilon = 1e-9);
    }

    #[test]
    fn lambda_half_hand_mixture() {
        let (m, u, t) = models(0.5);
        let pm1 = 10f64.powf(m.log10_prob(&["<s>", "<s>"], "haben#wir"));
        let pu1 = 10f64.powf(u.log10_prob(&["<s>", "<s>"], "haben") + u.log10_prob(&["<s>", "haben"], "wir"));
        let pm2 = 10f64.powf(m.log10_prob(&["<s>", "haben#wir"], "gesagt"));
        let pu2 = 10f64.powf(u.log10_prob(&["haben", "wir"], "gesagt"));
        let pm3 = 10f64.powf(m.log10_prob(&["haben#wir", "gesagt"], "</s>"));
        let pu3 = 10f64.powf(u.log10_prob(&["wir", "gesagt"], "</s>"));
        let expected = (0.5 * pm1 + 0.5 * pu1).log10() + (0.5 * pm2 + 0.5 * pu2).log10() + (0.5 * pm3 + 0.5 * pu3).log10();
        let s = tokenize("haben#wir gesagt");
        assert_abs_diff_eq!(score_interpolated(&m, &u, &t, &s), expected, epsilon = 1e-9);
    }

    #[test]
    fn expanding_scorer_chains_parts() {
        let (_, u, _) = models(0.5);
        let sc = ExpandingScorer::new(&u, None, &[]);
        let s = tokenize("haben#wir gesagt");
        assert_abs_diff_eq!(sc.score_sentence(&s), u.score_sentence(&expand_clitics(&s)), epsilon = 1e-9);
    }
}
