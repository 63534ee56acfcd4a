//! Translation-bearing pronunciation lexicon: standard-language words carry
//! the pronunciations of the dialect words that map to them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::MappingCandidate;
use crate::g2p::GraphoneModel;
use crate::ngram::CLITIC_SEPARATOR;
use crate::scalar::Scalar;
use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

/// Cosine distance threshold used when none is configured.
pub const DEFAULT_MAX_COSINE_DIST: f64 = 0.6;

fn check_symbol(s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        Err(Error::InvalidArgument(format!("invalid phone symbol {s:?}")))
    } else {
        Ok(())
    }
}

/// Ordered set of phone symbols; a symbol's index is its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhoneSet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhoneSet {
    /// Rejects empty, whitespace-containing and duplicate symbols.
    pub fn new<I: IntoIterator<Item = String>>(symbols: I) -> Result<Self> {
        let mut set = PhoneSet::default();
        for s in symbols {
            check_symbol(&s)?;
            if set.index.contains_key(&s) {
                return Err(Error::InvalidArgument(format!("duplicate phone symbol {s:?}")));
            }
            set.index.insert(s.clone(), set.symbols.len());
            set.symbols.push(s);
        }
        Ok(set)
    }

    /// Sorted set of every phone used in `lex`.
    pub fn from_lexicon(lex: &[LexiconEntry]) -> Self {
        let mut all: Vec<String> = lex
            .iter()
            .flat_map(|e| e.prons.iter().flat_map(|(p, _)| p.phones().iter().cloned()))
            .collect();
        all.sort();
        all.dedup();
        PhoneSet::new(all).expect("lexicon phones are valid symbols")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, phone: &str) -> Option<usize> {
        self.index.get(phone).copied()
    }

    pub fn contains(&self, phone: &str) -> bool {
        self.index.contains_key(phone)
    }

    /// True when both sets hold the same symbols, in any order.
    pub fn same_symbols(&self, other: &PhoneSet) -> bool {
        self.len() == other.len() && self.symbols.iter().all(|s| other.contains(s))
    }

    pub fn is_superset_of(&self, other: &PhoneSet) -> bool {
        other.symbols.iter().all(|s| self.contains(s))
    }
}

/// A non-empty phone sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Pronunciation(Vec<String>);

impl Pronunciation {
    pub fn new(phones: Vec<String>) -> Result<Self> {
        if phones.is_empty() {
            return Err(Error::InvalidArgument("empty pronunciation".into()));
        }
        for p in &phones {
            check_symbol(p)?;
        }
        Ok(Pronunciation(phones))
    }

    /// Whitespace-separated phones.
    pub fn parse(text: &str) -> Result<Self> {
        Pronunciation::new(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn phones(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn uses_only(&self, set: &PhoneSet) -> bool {
        self.0.iter().all(|p| set.contains(p))
    }
}

impl fmt::Display for Pronunciation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl TryFrom<Vec<String>> for Pronunciation {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Pronunciation::new(v)
    }
}

impl From<Pronunciation> for Vec<String> {
    fn from(p: Pronunciation) -> Self {
        p.0
    }
}

/// A word (or merged clitic token) with its weighted pronunciations. The best
/// pronunciation has weight 1; the others are relative to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub prons: Vec<(Pronunciation, f64)>,
}

impl LexiconEntry {
    /// Merges duplicate pronunciations by summing raw weights, then rescales
    /// so the largest weight is 1. Order: weight descending, then phones.
    pub fn from_weighted(word: &str, raw: impl IntoIterator<Item = (Pronunciation, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Pronunciation, f64> = BTreeMap::new();
        for (p, w) in raw {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!("non-positive weight {w} for {word}")));
            }
            *merged.entry(p).or_insert(0.0) += w;
        }
        if merged.is_empty() {
            return Err(Error::InvalidArgument(format!("{word} has no pronunciation")));
        }
        let max = merged.values().cloned().fold(f64::MIN, f64::max);
        let mut prons: Vec<(Pronunciation, f64)> = merged.into_iter().map(|(p, w)| (p, w / max)).collect();
        prons.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(LexiconEntry {
            word: word.to_string(),
            prons,
        })
    }
}

/// Word vectors of a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T: Scalar> {
    dim: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be at least 1".into()));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn insert(&mut self, word: &str, v: Vec<T>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector for {word} has length {}, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite component in vector for {word}")));
        }
        self.vectors.insert(word.to_string(), v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[T]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// `1 - cos(a, b)`; `None` if either word is missing. A zero vector is at
    /// distance 1 from everything.
    pub fn cosine_distance(&self, a: &str, b: &str) -> Option<T> {
        Some(cosine_distance(self.get(a)?, self.get(b)?))
    }

    /// Text format: `vocab_size dim`, then `word v1 ... vdim` per line.
    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "embeddings";
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(WHAT, 1, "missing header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(WHAT, 1, "bad header")))
            .collect::<Result<_>>()?;
        let [vocab, dim] = h[..] else {
            return Err(Error::parse(WHAT, 1, "header must be `vocab_size dim`"));
        };
        let mut table = EmbeddingTable::new(dim).map_err(|e| Error::parse(WHAT, 1, e.to_string()))?;
        for (i, line) in lines {
            let mut it = line.split_whitespace();
            let word = it.next().expect("non-blank line");
            let v: Vec<T> = it
                .map(|t| t.parse().map_err(|_| Error::parse(WHAT, i + 1, format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            table.insert(word, v).map_err(|e| Error::parse(WHAT, i + 1, e.to_string()))?;
        }
        if table.len() != vocab {
            return Err(Error::parse(
                WHAT,
                1,
                format!("header says {vocab} words, found {}", table.len()),
            ));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut s = format!("{} {}\n", words.len(), self.dim);
        for w in words {
            s.push_str(w);
            for x in &self.vectors[w] {
                s.push_str(&format!(" {x}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn cosine_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let dot: T = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let na: T = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::one();
    }
    T::one() - dot / (na * nb)
}

/// One clitic: a dialect surface form and the standard words it fuses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliticEntry {
    pub dialect_surface: String,
    pub standard_parts: Vec<String>,
    pub merged_token: String,
}

impl CliticEntry {
    pub fn new(dialect_surface: &str, standard_parts: &[&str]) -> Result<Self> {
        if dialect_surface.is_empty() || dialect_surface.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("bad clitic surface {dialect_surface:?}")));
        }
        if standard_parts.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "clitic {dialect_surface} needs at least two standard words"
            )));
        }
        if standard_parts
            .iter()
            .any(|p| p.is_empty() || p.contains(CLITIC_SEPARATOR) || p.chars().any(char::is_whitespace))
        {
            return Err(Error::InvalidArgument(format!("bad standard part in clitic {dialect_surface}")));
        }
        Ok(CliticEntry {
            dialect_surface: dialect_surface.to_string(),
            standard_parts: standard_parts.iter().map(|s| s.to_string()).collect(),
            merged_token: standard_parts.join(&CLITIC_SEPARATOR.to_string()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CliticInventory {
    pub entries: Vec<CliticEntry>,
}

impl CliticInventory {
    pub fn new(entries: Vec<CliticEntry>) -> Self {
        CliticInventory { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merged tokens, deduplicated, in inventory order.
    pub fn merged_tokens(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.entries
            .iter()
            .map(|e| e.merged_token.as_str())
            .filter(|t| seen.insert(*t))
            .collect()
    }

    /// TSV: `dialect_surface TAB part1 part2 ...`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (surface, parts) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("clitic inventory", i + 1, "expected surface TAB parts"))?;
            let parts: Vec<&str> = parts.split_whitespace().collect();
            entries.push(
                CliticEntry::new(surface.trim(), &parts)
                    .map_err(|e| Error::parse("clitic inventory", i + 1, e.to_string()))?,
            );
        }
        Ok(CliticInventory { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\n", e.dialect_surface, e.standard_parts.join(" ")))
            .collect()
    }
}

/// Keeps candidates with `cooccurrence_count >= min_count` and
/// `probability >= min_prob`, in input order.
pub fn filter_by_frequency(
    cands: &[MappingCandidate],
    min_count: u64,
    min_prob: f64,
) -> Result<Vec<MappingCandidate>> {
    if min_count < 1 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&min_prob) {
        return Err(Error::InvalidArgument(format!("min_prob {min_prob} outside [0,1]")));
    }
    Ok(cands
        .iter()
        .filter(|c| c.cooccurrence_count >= min_count && c.probability >= min_prob)
        .cloned()
        .collect())
}

// Center of a group: highest co-occurrence count, then highest probability,
// then smallest dialect word.
fn is_better_center(a: &MappingCandidate, b: &MappingCandidate) -> bool {
    a.cooccurrence_count
        .cmp(&b.cooccurrence_count)
        .then_with(|| a.probability.total_cmp(&b.probability))
        .then_with(|| b.dialect_word.cmp(&a.dialect_word))
        .is_gt()
}

/// Within each standard word's group, keeps dialect variants whose vector lies
/// within `max_cosine_dist` of the group center (the variant with the most
/// co-occurrences). The center always stays; so does any candidate when either
/// vector is missing.
pub fn filter_by_embedding_vicinity<T: Scalar>(
    cands: &[MappingCandidate],
    emb: &EmbeddingTable<T>,
    max_cosine_dist: f64,
) -> Result<Vec<MappingCandidate>> {
    if !(0.0..=2.0).contains(&max_cosine_dist) {
        return Err(Error::InvalidArgument(format!(
            "max_cosine_dist {max_cosine_dist} outside [0,2]"
        )));
    }
    let mut centers: HashMap<&str, &MappingCandidate> = HashMap::new();
    for c in cands {
        let slot = centers.entry(c.standard_word.as_str()).or_insert(c);
        if is_better_center(c, slot) {
            *slot = c;
        }
    }
    Ok(cands
        .iter()
        .filter(|c| {
            let center = centers[c.standard_word.as_str()];
            if std::ptr::eq(*c, center) || c.dialect_word == center.dialect_word {
                return true;
            }
            match emb.cosine_distance(&c.dialect_word, &center.dialect_word) {
                Some(d) => d.as_f64() <= max_cosine_dist,
                None => true,
            }
        })
        .cloned()
        .collect())
}

/// A mapping or clitic that produced no lexicon entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedEntry {
    pub dialect_word: String,
    pub target: String,
    pub reason: String,
}

/// Builds the lexicon: every mapping contributes the transduced pronunciation
/// of its dialect spelling to its standard word, weighted by the mapping
/// probability. Entries come out sorted by word.
pub fn assemble_lexicon(
    cands: &[MappingCandidate],
    g2p: &GraphoneModel,
    beam: usize,
) -> Result<(Vec<LexiconEntry>, Vec<SkippedEntry>)> {
    let mut raw: BTreeMap<&str, Vec<(Pronunciation, f64)>> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut cache: HashMap<&str, Result<Pronunciation, String>> = HashMap::new();
    for c in cands {
        let pron = cache
            .entry(c.dialect_word.as_str())
            .or_insert_with(|| g2p.transduce(&c.dialect_word, beam).map_err(|e| e.to_string()));
        match pron {
            Ok(p) if c.probability > 0.0 => raw.entry(&c.standard_word).or_default().push((p.clone(), c.probability)),
            Ok(_) => skipped.push(SkippedEntry {
                dialect_word: c.dialect_word.clone(),
                target: c.standard_word.clone(),
                reason: "zero mapping probability".into(),
            }),
            Err(e) => skipped.push(SkippedEntry {
                dialect_word: c.dialect_word.clone(),
                target: c.standard_word.clone(),
                reason: e.clone(),
            }),
        }
    }
    let lex = raw
        .into_iter()
        .map(|(w, prons)| LexiconEntry::from_weighted(w, prons))
        .collect::<Result<_>>()?;
    Ok((lex, skipped))
}

/// Adds one entry per clitic (word = merged token, pronunciation = transduced
/// dialect surface). A merged token already in the lexicon gains the
/// pronunciation at full weight instead of a second entry.
pub fn add_clitic_entries(
    lex: &[LexiconEntry],
    clitics: &CliticInventory,
    g2p: &GraphoneModel,
    beam: usize,
) -> Result<(Vec<LexiconEntry>, Vec<SkippedEntry>)> {
    let mut out = lex.to_vec();
    let mut skipped = Vec::new();
    for c in &clitics.entries {
        let pron = match g2p.transduce(&c.dialect_surface, beam) {
            Ok(p) => p,
            Err(e) => {
                skipped.push(SkippedEntry {
                    dialect_word: c.dialect_surface.clone(),
                    target: c.merged_token.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match out.iter_mut().find(|e| e.word == c.merged_token) {
            Some(entry) => {
                let mut prons: Vec<(Pronunciation, f64)> =
                    entry.prons.iter().filter(|(p, _)| *p != pron).cloned().collect();
                prons.push((pron, 1.0));
                *entry = LexiconEntry::from_weighted(&c.merged_token, prons)?;
            }
            None => out.push(LexiconEntry::from_weighted(&c.merged_token, [(pron, 1.0)])?),
        }
    }
    Ok((out, skipped))
}

/// Usage counts per (word, pronunciation), e.g. from forced alignments.
pub type UsageCounts = BTreeMap<(String, Pronunciation), u64>;

/// Drops pronunciations used fewer than `min_rel_usage` times the most used
/// pronunciation of the same word. Missing usage counts as 0. A word always
/// keeps at least one pronunciation; weights are renormalized afterwards.
pub fn prune_lexicon(lex: &[LexiconEntry], usage: &UsageCounts, min_rel_usage: f64) -> Result<Vec<LexiconEntry>> {
    if !(0.0..=1.0).contains(&min_rel_usage) {
        return Err(Error::InvalidArgument(format!("min_rel_usage {min_rel_usage} outside [0,1]")));
    }
    lex.iter()
        .map(|e| {
            let count = |p: &Pronunciation| usage.get(&(e.word.clone(), p.clone())).copied().unwrap_or(0);
            let max = e.prons.iter().map(|(p, _)| count(p)).max().unwrap_or(0);
            let threshold = min_rel_usage * max as f64;
            let mut kept: Vec<(Pronunciation, f64)> = e
                .prons
                .iter()
                .filter(|(p, _)| count(p) as f64 >= threshold)
                .cloned()
                .collect();
            if kept.is_empty() {
                kept.push(e.prons[0].clone());
            }
            LexiconEntry::from_weighted(&e.word, kept)
        })
        .collect()
}

/// Lexicon TSV: `word TAB weight TAB phone phone ...`, one line per pronunciation.
pub fn lexicon_to_tsv(lex: &[LexiconEntry]) -> String {
    let mut s = String::new();
    for e in lex {
        for (p, w) in &e.prons {
            s.push_str(&format!("{}\t{:.4}\t{}\n", e.word, w, p));
        }
    }
    s
}

/// Parses lexicon TSV; lines of the same word are grouped in first-seen order.
pub fn parse_lexicon_tsv(text: &str) -> Result<Vec<LexiconEntry>> {
    const WHAT: &str = "lexicon";
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<(Pronunciation, f64)>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(WHAT, i + 1, "expected word TAB weight TAB phones"));
        }
        let word = cols[0].trim();
        if word.is_empty() {
            return Err(Error::parse(WHAT, i + 1, "empty word"));
        }
        let w: f64 = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(WHAT, i + 1, "bad weight"))?;
        if !(w > 0.0 && w <= 1.0) {
            return Err(Error::parse(WHAT, i + 1, "weight outside (0,1]"));
        }
        let p = Pronunciation::parse(cols[2]).map_err(|e| Error::parse(WHAT, i + 1, e.to_string()))?;
        let prons = grouped.entry(word.to_string()).or_insert_with(|| {
            order.push(word.to_string());
            Vec::new()
        });
        if prons.iter().any(|(q, _)| *q == p) {
            return Err(Error::parse(WHAT, i + 1, format!("duplicate pronunciation for {word}")));
        }
        prons.push((p, w));
    }
    Ok(order
        .into_iter()
        .map(|w| {
            let prons = grouped.remove(&w).expect("grouped word");
            let max = prons.iter().map(|(_, x)| *x).fold(f64::MIN, f64::max);
            LexiconEntry {
                word: w,
                prons: prons.into_iter().map(|(p, x)| (p, x / max)).collect(),
            }
        })
        .collect())
}

pub fn read_lexicon(path: &Path) -> Result<Vec<LexiconEntry>> {
    parse_lexicon_tsv(&read_to_string(path)?)
}

pub fn write_lexicon(path: &Path, lex: &[LexiconEntry]) -> Result<()> {
    write_string(path, &lexicon_to_tsv(lex))
}
