//! Text ingestion, frequency statistics and word-mapping extraction from
//! dialect/standard parallel text.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

/// Characters removed from both ends of every token.
const STRIP_CHARS: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')'];

/// Default number of EM iterations for [`extract_mappings`].
pub const DEFAULT_EM_ITERATIONS: usize = 5;
/// Translation probability below which a candidate is not emitted.
pub const MAPPING_THRESHOLD: f64 = 0.01;

/// A tokenized, lowercased sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Sentence(Vec<String>);

impl Sentence {
    /// Builds a sentence from already-split tokens, rejecting empty tokens and
    /// tokens containing whitespace.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        for t in &tokens {
            if t.is_empty() {
                return Err(Error::InvalidArgument("empty token".into()));
            }
            if t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("token {t:?} contains whitespace")));
            }
        }
        Ok(Sentence(tokens))
    }

    pub(crate) fn from_valid(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Sentence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    /// Space-joined text.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

impl TryFrom<Vec<String>> for Sentence {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Sentence::new(v)
    }
}

impl From<Sentence> for Vec<String> {
    fn from(s: Sentence) -> Self {
        s.0
    }
}

impl<'a> IntoIterator for &'a Sentence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Lowercases, splits on Unicode whitespace and strips edge punctuation.
pub fn tokenize(text: &str) -> Sentence {
    let tokens = text
        .split_whitespace()
        .map(|w| w.trim_matches(STRIP_CHARS).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect();
    Sentence(tokens)
}

/// Word counts over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let total = counts.values().sum();
        FrequencyTable { counts, total }
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, c)| (w.as_str(), *c))
    }

    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(word.to_string()).or_insert(0) += n;
        self.total += n;
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &FrequencyTable) {
        for (w, c) in other.iter() {
            self.add(w, c);
        }
    }

    /// `word TAB count` lines, most frequent first.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<_> = self.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows.iter().map(|(w, c)| format!("{w}\t{c}\n")).collect()
    }
}

pub fn word_frequencies(corpus: &[Sentence]) -> FrequencyTable {
    let mut table = FrequencyTable::default();
    for s in corpus {
        for w in s {
            table.add(w, 1);
        }
    }
    table
}

/// Sentence-aligned dialect/standard text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelCorpus {
    pairs: Vec<(Sentence, Sentence)>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<(Sentence, Sentence)>) -> Result<Self> {
        if let Some(i) = pairs.iter().position(|(d, s)| d.is_empty() || s.is_empty()) {
            return Err(Error::InvalidArgument(format!("pair {i} has an empty side")));
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn pairs(&self) -> &[(Sentence, Sentence)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dialect_side(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|(d, _)| d.clone()).collect()
    }

    pub fn standard_side(&self) -> Vec<Sentence> {
        self.pairs.iter().map(|(_, s)| s.clone()).collect()
    }

    /// Parses `dialect TAB standard` lines. Blank lines are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(d), Some(s), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::parse("parallel corpus", i + 1, "expected exactly one TAB"));
            };
            let (d, s) = (tokenize(d), tokenize(s));
            if d.is_empty() || s.is_empty() {
                return Err(Error::parse("parallel corpus", i + 1, "empty side after tokenization"));
            }
            pairs.push((d, s));
        }
        Ok(ParallelCorpus { pairs })
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        Self::parse_tsv(&read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        self.pairs
            .iter()
            .map(|(d, s)| format!("{d}\t{s}\n"))
            .collect()
    }
}

/// One sentence per line; blank lines become no sentence.
pub fn parse_monolingual(text: &str) -> Vec<Sentence> {
    text.lines()
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn read_monolingual(path: &Path) -> Result<Vec<Sentence>> {
    Ok(parse_monolingual(&read_to_string(path)?))
}

pub fn write_monolingual(path: &Path, corpus: &[Sentence]) -> Result<()> {
    let text: String = corpus.iter().map(|s| format!("{s}\n")).collect();
    write_string(path, &text)
}

/// A dialect word paired with a standard word it may translate to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCandidate {
    pub dialect_word: String,
    pub standard_word: String,
    pub probability: f64,
    pub cooccurrence_count: u64,
}

impl MappingCandidate {
    pub fn new(dialect: &str, standard: &str, probability: f64, count: u64) -> Self {
        MappingCandidate {
            dialect_word: dialect.to_string(),
            standard_word: standard.to_string(),
            probability,
            cooccurrence_count: count,
        }
    }
}

pub fn mappings_to_tsv(cands: &[MappingCandidate]) -> String {
    cands
        .iter()
        .map(|c| {
            format!(
                "{}\t{}\t{:.6}\t{}\n",
                c.dialect_word, c.standard_word, c.probability, c.cooccurrence_count
            )
        })
        .collect()
}

pub fn parse_mappings_tsv(text: &str) -> Result<Vec<MappingCandidate>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse("mappings", i + 1, "expected 4 TAB-separated columns"));
        }
        let probability: f64 = cols[2]
            .parse()
            .map_err(|_| Error::parse("mappings", i + 1, "bad probability"))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::parse("mappings", i + 1, "probability outside [0,1]"));
        }
        let count: u64 = cols[3]
            .parse()
            .map_err(|_| Error::parse("mappings", i + 1, "bad count"))?;
        if count == 0 {
            return Err(Error::parse("mappings", i + 1, "count must be at least 1"));
        }
        out.push(MappingCandidate::new(cols[0], cols[1], probability, count));
    }
    Ok(out)
}

/// Lexical translation table `p(standard | dialect)` trained with EM over
/// sentence pairs (IBM Model 1 without a null word, uniform start).
#[derive(Debug, Clone)]
pub struct WordTranslationModel {
    dialect_vocab: Vec<String>,
    standard_vocab: Vec<String>,
    /// Per dialect word: co-occurring standard word ids (sorted) and their probabilities.
    table: Vec<Vec<(usize, f64)>>,
    cooccurrence: Vec<Vec<(usize, u64)>>,
    log_likelihoods: Vec<f64>,
}

impl WordTranslationModel {
    pub fn train(parallel: &ParallelCorpus, iterations: usize) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidArgument("em_iterations must be at least 1".into()));
        }
        let dialect_vocab: Vec<String> = parallel
            .pairs()
            .iter()
            .flat_map(|(d, _)| d.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let standard_vocab: Vec<String> = parallel
            .pairs()
            .iter()
            .flat_map(|(_, s)| s.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let d_index = |w: &String| dialect_vocab.binary_search(w).expect("in vocab");
        let s_index = |w: &String| standard_vocab.binary_search(w).expect("in vocab");

        let pairs: Vec<(Vec<usize>, Vec<usize>)> = parallel
            .pairs()
            .iter()
            .map(|(d, s)| (d.iter().map(d_index).collect(), s.iter().map(s_index).collect()))
            .collect();

        let mut cooc: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); dialect_vocab.len()];
        for (d, s) in &pairs {
            let ds: BTreeSet<usize> = d.iter().copied().collect();
            let ss: BTreeSet<usize> = s.iter().copied().collect();
            for &di in &ds {
                for &si in &ss {
                    *cooc[di].entry(si).or_insert(0) += 1;
                }
            }
        }
        let cooccurrence: Vec<Vec<(usize, u64)>> =
            cooc.into_iter().map(|m| m.into_iter().collect()).collect();

        let uniform = if standard_vocab.is_empty() {
            0.0
        } else {
            1.0 / standard_vocab.len() as f64
        };
        let mut table: Vec<Vec<(usize, f64)>> = cooccurrence
            .iter()
            .map(|row| row.iter().map(|&(s, _)| (s, uniform)).collect())
            .collect();

        let lookup = |table: &[Vec<(usize, f64)>], d: usize, s: usize| -> f64 {
            let row = &table[d];
            let i = row.binary_search_by_key(&s, |&(k, _)| k).expect("co-occurring pair");
            row[i].1
        };

        let mut log_likelihoods = Vec::with_capacity(iterations + 1);
        for _ in 0..iterations {
            let mut counts: Vec<Vec<f64>> = table.iter().map(|r| vec![0.0; r.len()]).collect();
            let mut ll = 0.0;
            for (d, s) in &pairs {
                for &si in s {
                    let z: f64 = d.iter().map(|&di| lookup(&table, di, si)).sum();
                    ll += (z / d.len() as f64).ln();
                    for &di in d {
                        let row = &table[di];
                        let k = row.binary_search_by_key(&si, |&(k, _)| k).expect("pair");
                        counts[di][k] += row[k].1 / z;
                    }
                }
            }
            log_likelihoods.push(ll);
            for (row, c) in table.iter_mut().zip(&counts) {
                let total: f64 = c.iter().sum();
                for (entry, &ci) in row.iter_mut().zip(c) {
                    entry.1 = ci / total;
                }
            }
        }
        let final_ll: f64 = pairs
            .iter()
            .flat_map(|(d, s)| {
                let table = &table;
                s.iter().map(move |&si| {
                    let z: f64 = d.iter().map(|&di| lookup(table, di, si)).sum();
                    (z / d.len() as f64).ln()
                })
            })
            .sum();
        log_likelihoods.push(final_ll);
        debug_assert!(
            log_likelihoods
                .windows(2)
                .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0)),
            "EM likelihood decreased: {log_likelihoods:?}"
        );

        Ok(WordTranslationModel {
            dialect_vocab,
            standard_vocab,
            table,
            cooccurrence,
            log_likelihoods,
        })
    }

    /// Data log-likelihood (natural log) before each iteration, followed by the
    /// value under the final parameters.
    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn dialect_vocab(&self) -> &[String] {
        &self.dialect_vocab
    }

    /// Full distribution `p(· | dialect)` over co-occurring standard words.
    pub fn distribution(&self, dialect: &str) -> Vec<(&str, f64)> {
        match self.dialect_vocab.binary_search_by(|w| w.as_str().cmp(dialect)) {
            Ok(d) => self.table[d]
                .iter()
                .map(|&(s, p)| (self.standard_vocab[s].as_str(), p))
                .collect(),
            Err(_) => Vec::new(),
        }
    }

    pub fn prob(&self, dialect: &str, standard: &str) -> f64 {
        self.distribution(dialect)
            .into_iter()
            .find(|(s, _)| *s == standard)
            .map_or(0.0, |(_, p)| p)
    }

    /// Candidates with probability at least `threshold`, sorted by dialect word
    /// then descending probability.
    pub fn candidates(&self, threshold: f64) -> Vec<MappingCandidate> {
        let mut out = Vec::new();
        for (d, row) in self.table.iter().enumerate() {
            let mut group: Vec<MappingCandidate> = row
                .iter()
                .zip(&self.cooccurrence[d])
                .filter(|((_, p), _)| *p >= threshold)
                .map(|(&(s, p), &(_, n))| {
                    MappingCandidate::new(&self.dialect_vocab[d], &self.standard_vocab[s], p, n)
                })
                .collect();
            group.sort_by(|a, b| {
                b.probability
                    .total_cmp(&a.probability)
                    .then_with(|| a.standard_word.cmp(&b.standard_word))
            });
            out.extend(group);
        }
        out
    }
}

/// Runs word-translation EM and emits every mapping with probability ≥ 0.01.
pub fn extract_mappings(parallel: &ParallelCorpus, em_iterations: usize) -> Result<Vec<MappingCandidate>> {
    Ok(WordTranslationModel::train(parallel, em_iterations)?.candidates(MAPPING_THRESHOLD))
}
