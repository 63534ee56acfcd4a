use std::fmt::Write as _;

use crate::corpus::{FrequencyTable, Sentence};
use crate::{Error, Result};

/// Trailing marker on every non-final compound part.
pub const COMPOUND_MARKER: char = '+';

/// Frequency-based compound splitter.
///
/// A word is replaced by the split into known parts with the highest geometric
/// mean of part counts, provided that mean beats the count of the whole word.
/// A linking element between two parts stays attached to the left part, so
/// `arbeitsamt` may become `arbeits+ amt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundSplitter {
    part_vocab: FrequencyTable,
    min_part_len: usize,
    min_part_count: u64,
    linkers: Vec<String>,
}

pub const DEFAULT_LINKERS: [&str; 5] = ["s", "es", "n", "en", "e"];

impl CompoundSplitter {
    pub fn new(
        part_vocab: FrequencyTable,
        min_part_len: usize,
        min_part_count: u64,
        linkers: Vec<String>,
    ) -> Result<Self> {
        if min_part_len < 3 {
            return Err(Error::InvalidArgument("min_part_len must be at least 3".into()));
        }
        if linkers.iter().any(|l| l.is_empty()) {
            return Err(Error::InvalidArgument("empty linker".into()));
        }
        Ok(CompoundSplitter {
            part_vocab,
            min_part_len,
            min_part_count: min_part_count.max(1),
            linkers,
        })
    }

    /// Splitter over `part_vocab` with default length, count and linker settings.
    pub fn with_defaults(part_vocab: FrequencyTable) -> Self {
        CompoundSplitter::new(
            part_vocab,
            3,
            1,
            DEFAULT_LINKERS.iter().map(|s| s.to_string()).collect(),
        )
        .expect("defaults are valid")
    }

    pub fn min_part_len(&self) -> usize {
        self.min_part_len
    }

    pub fn min_part_count(&self) -> u64 {
        self.min_part_count
    }

    pub fn linkers(&self) -> &[String] {
        &self.linkers
    }

    pub fn part_vocab(&self) -> &FrequencyTable {
        &self.part_vocab
    }

    fn part_count(&self, chars: &[char]) -> Option<u64> {
        if chars.len() < self.min_part_len {
            return None;
        }
        let s: String = chars.iter().collect();
        let c = self.part_vocab.count(&s);
        (c >= self.min_part_count).then_some(c)
    }

    /// Best split of one word. Non-final parts carry the trailing marker;
    /// a word without a qualifying split comes back unchanged.
    pub fn split_word(&self, word: &str) -> Vec<String> {
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();
        if n < 2 * self.min_part_len || word.contains(COMPOUND_MARKER) {
            return vec![word.to_string()];
        }
        let max_parts = n / self.min_part_len;
        // best[k][i]: best sum of ln(count) over k parts covering chars[..i]
        // where i is the start of the next part (or n when complete).
        let mut best = vec![vec![f64::NEG_INFINITY; n + 1]; max_parts + 1];
        let mut back: Vec<Vec<Option<(usize, usize)>>> = vec![vec![None; n + 1]; max_parts + 1];
        best[0][0] = 0.0;
        for k in 0..max_parts {
            for start in 0..n {
                if best[k][start] == f64::NEG_INFINITY {
                    continue;
                }
                for end in start + self.min_part_len..=n {
                    let Some(c) = self.part_count(&chars[start..end]) else { continue };
                    let score = best[k][start] + (c as f64).ln();
                    let mut nexts = vec![end];
                    if end < n {
                        for l in &self.linkers {
                            let lc: Vec<char> = l.chars().collect();
                            if chars[end..].starts_with(&lc) && end + lc.len() < n {
                                nexts.push(end + lc.len());
                            }
                        }
                    }
                    for next in nexts {
                        if score > best[k + 1][next] {
                            best[k + 1][next] = score;
                            back[k + 1][next] = Some((start, end));
                        }
                    }
                }
            }
        }
        let whole = self.part_vocab.count(word);
        let threshold = if whole == 0 {
            f64::NEG_INFINITY
        } else {
            (whole as f64).ln()
        };
        let mut choice: Option<(usize, f64)> = None;
        for (k, row) in best.iter().enumerate().skip(2) {
            if row[n] == f64::NEG_INFINITY {
                continue;
            }
            let mean = row[n] / k as f64;
            if mean > threshold && choice.is_none_or(|(_, m)| mean > m) {
                choice = Some((k, mean));
            }
        }
        let Some((k, _)) = choice else {
            return vec![word.to_string()];
        };
        let mut parts = Vec::with_capacity(k);
        let (mut pos, mut kk) = (n, k);
        while kk > 0 {
            let (start, _) = back[kk][pos].expect("back-pointer");
            let mut part: String = chars[start..pos].iter().collect();
            if pos != n {
                part.push(COMPOUND_MARKER);
            }
            parts.push(part);
            pos = start;
            kk -= 1;
        }
        parts.reverse();
        parts
    }

    pub fn split_sentence(&self, sentence: &Sentence) -> Sentence {
        Sentence::from_valid(sentence.iter().flat_map(|w| self.split_word(w)).collect())
    }

    /// `key TAB value` configuration: min_part_len, min_part_count, linkers.
    pub fn config_tsv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "min_part_len\t{}", self.min_part_len).unwrap();
        writeln!(s, "min_part_count\t{}", self.min_part_count).unwrap();
        writeln!(s, "linkers\t{}", self.linkers.join(",")).unwrap();
        s
    }

    pub fn from_config_tsv(text: &str, part_vocab: FrequencyTable) -> Result<Self> {
        let (mut len, mut count) = (3usize, 1u64);
        let mut linkers: Vec<String> = DEFAULT_LINKERS.iter().map(|s| s.to_string()).collect();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("splitter config", i + 1, "expected key TAB value"))?;
            let bad = || Error::parse("splitter config", i + 1, format!("bad value for {k}"));
            match k {
                "min_part_len" => len = v.trim().parse().map_err(|_| bad())?,
                "min_part_count" => count = v.trim().parse().map_err(|_| bad())?,
                "linkers" => {
                    linkers = v
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                _ => return Err(Error::parse("splitter config", i + 1, format!("unknown key {k}"))),
            }
        }
        CompoundSplitter::new(part_vocab, len, count, linkers)
    }
}

pub fn split_compounds(sentence: &Sentence, splitter: &CompoundSplitter) -> Sentence {
    splitter.split_sentence(sentence)
}

/// Joins marked parts with the token that follows them. A trailing marked part
/// at the end of the input loses its marker.
pub fn join_compound_parts(tokens: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut pending = String::new();
    for t in tokens {
        match t.strip_suffix(COMPOUND_MARKER) {
            Some(stem) if !stem.is_empty() => pending.push_str(stem),
            _ => {
                pending.push_str(t);
                out.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        out.push(pending);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn vocab(entries: &[(&str, u64)]) -> FrequencyTable {
        FrequencyTable::from_counts(entries.iter().map(|(w, c)| (w.to_string(), *c)).collect::<BTreeMap<_, _>>())
    }

    #[test]
    fn schwimmbad() {
        let sp = CompoundSplitter::with_defaults(vocab(&[("schwimm", 50), ("bad", 80), ("schwimmbad", 2)]));
        assert_eq!(sp.split_word("schwimmbad"), ["schwimm+", "bad"]);
    }

    #[test]
    fn frequent_whole_word_unchanged() {
        let sp = CompoundSplitter::with_defaults(vocab(&[("schwimm", 50), ("bad", 80), ("schwimmbad", 500)]));
        assert_eq!(sp.split_word("schwimmbad"), ["schwimmbad"]);
    }

    #[test]
    fn linker_stays_on_left_part() {
        let sp = CompoundSplitter::with_defaults(vocab(&[("arbeit", 40), ("amt", 30)]));
        assert_eq!(sp.split_word("arbeitsamt"), ["arbeits+", "amt"]);
        assert_eq!(join_compound_parts(&sp.split_word("arbeitsamt")), ["arbeitsamt"]);
    }

    #[test]
    fn short_parts_rejected() {
        let sp = CompoundSplitter::with_defaults(vocab(&[("ab", 40), ("cdef", 30)]));
        assert_eq!(sp.split_word("abcdef"), ["abcdef"]);
        assert!(CompoundSplitter::new(FrequencyTable::default(), 2, 1, vec![]).is_err());
    }

    #[test]
    fn join_parts() {
        let t = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert_eq!(join_compound_parts(&t(&["schwimm+", "bad", "ist"])), ["schwimmbad", "ist"]);
        assert_eq!(join_compound_parts(&t(&["a", "b"])), ["a", "b"]);
        assert_eq!(join_compound_parts(&t(&["haus+"])), ["haus"]);
        assert_eq!(join_compound_parts(&t(&["+"])), ["+"]);
    }

    #[test]
    fn config_roundtrip() {
        let sp = CompoundSplitter::new(FrequencyTable::default(), 4, 2, vec!["s".into()]).unwrap();
        let back = CompoundSplitter::from_config_tsv(&sp.config_tsv(), FrequencyTable::default()).unwrap();
        assert_eq!(sp, back);
        assert!(CompoundSplitter::from_config_tsv("bogus\t1", FrequencyTable::default()).is_err());
    }
}
