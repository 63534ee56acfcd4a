use std::collections::BTreeSet;
use std::path::Path;

use crate::corpus::Sentence;
use crate::util::read_to_string;
use crate::{Error, Result};

/// Separator inside merged clitic tokens such as `haben#wir`.
pub const CLITIC_SEPARATOR: char = '#';
pub const DEFAULT_CLITIC_LAMBDA: f64 = 0.5;

/// Word sequences that are merged into one LM token, and the weight of the
/// merged model when interpolating with the unmerged one.
#[derive(Debug, Clone, PartialEq)]
pub struct CliticTable {
    merged: BTreeSet<String>,
    /// Part sequences, longest first, for leftmost-longest matching.
    patterns: Vec<(Vec<String>, String)>,
    lambda: f64,
}

impl CliticTable {
    pub fn new<I, S>(merged: I, lambda: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0,1]")));
        }
        let merged: BTreeSet<String> = merged.into_iter().map(Into::into).collect();
        let mut patterns = Vec::with_capacity(merged.len());
        for m in &merged {
            let parts: Vec<String> = m.split(CLITIC_SEPARATOR).map(str::to_string).collect();
            if parts.len() < 2 || parts.iter().any(|p| p.is_empty() || p.chars().any(char::is_whitespace)) {
                return Err(Error::InvalidArgument(format!("malformed clitic token {m:?}")));
            }
            patterns.push((parts, m.clone()));
        }
        patterns.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(&b.1)));
        Ok(CliticTable {
            merged,
            patterns,
            lambda,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        CliticTable::new(self.merged.iter().cloned(), lambda)
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.merged.contains(token)
    }

    pub fn merged_tokens(&self) -> impl Iterator<Item = &str> {
        self.merged.iter().map(String::as_str)
    }

    pub fn merge_sentence(&self, sentence: &Sentence) -> Sentence {
        let toks = sentence.tokens();
        let mut out = Vec::with_capacity(toks.len());
        let mut i = 0;
        'outer: while i < toks.len() {
            for (parts, merged) in &self.patterns {
                if toks[i..].starts_with(parts) {
                    out.push(merged.clone());
                    i += parts.len();
                    continue 'outer;
                }
            }
            out.push(toks[i].clone());
            i += 1;
        }
        Sentence::from_valid(out)
    }

    /// One merged token per line; blank lines ignored.
    pub fn parse(text: &str, lambda: f64) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, l) in text.lines().enumerate() {
            let l = l.trim();
            if l.is_empty() {
                continue;
            }
            if !l.contains(CLITIC_SEPARATOR) {
                return Err(Error::parse("clitic table", i + 1, format!("{l:?} has no '#'")));
            }
            tokens.push(l.to_string());
        }
        CliticTable::new(tokens, lambda)
    }

    pub fn read(path: &Path, lambda: f64) -> Result<Self> {
        Self::parse(&read_to_string(path)?, lambda)
    }

    pub fn to_text(&self) -> String {
        self.merged.iter().map(|m| format!("{m}\n")).collect()
    }
}

/// Replaces leftmost non-overlapping occurrences of clitic part sequences by
/// their merged token.
pub fn merge_clitics_in_corpus(corpus: &[Sentence], clitics: &CliticTable) -> Vec<Sentence> {
    corpus.iter().map(|s| clitics.merge_sentence(s)).collect()
}

/// Splits every token on the clitic separator.
pub fn expand_clitics(sentence: &Sentence) -> Sentence {
    Sentence::from_valid(
        sentence
            .iter()
            .flat_map(|t| split_clitic(t))
            .collect(),
    )
}

pub(crate) fn split_clitic(token: &str) -> Vec<String> {
    if token.contains(CLITIC_SEPARATOR) && token.split(CLITIC_SEPARATOR).all(|p| !p.is_empty()) {
        token.split(CLITIC_SEPARATOR).map(str::to_string).collect()
    } else {
        vec![token.to_string()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    fn table() -> CliticTable {
        CliticTable::new(["haben#wir"], 0.5).unwrap()
    }

    #[test]
    fn merges_pair() {
        let out = merge_clitics_in_corpus(&[tokenize("haben wir gesagt")], &table());
        assert_eq!(out[0].tokens(), ["haben#wir", "gesagt"]);
    }

    #[test]
    fn greedy_non_overlapping() {
        let out = table().merge_sentence(&tokenize("haben wir haben wir"));
        assert_eq!(out.tokens(), ["haben#wir", "haben#wir"]);
    }

    #[test]
    fn empty_table_is_identity() {
        let t = CliticTable::new(Vec::<String>::new(), 0.5).unwrap();
        let s = tokenize("haben wir gesagt");
        assert_eq!(t.merge_sentence(&s), s);
    }

    #[test]
    fn malformed() {
        assert!(CliticTable::new(["habenwir"], 0.5).is_err());
        assert!(CliticTable::new(["haben#"], 0.5).is_err());
        assert!(CliticTable::new(["a#b"], 1.5).is_err());
        assert!(CliticTable::parse("a b\n", 0.5).is_err());
    }

    proptest! {
        #[test]
        fn merge_then_expand_is_identity(words in proptest::collection::vec(
            prop_oneof![Just("haben"), Just("wir"), Just("gesagt"), Just("ist"), Just("es")], 0..12)) {
            let t = CliticTable::new(["haben#wir", "ist#es"], 0.5).unwrap();
            let s = Sentence::new(words.iter().map(|w| w.to_string()).collect()).unwrap();
            prop_assert_eq!(expand_clitics(&t.merge_sentence(&s)), s);
        }
    }
}
