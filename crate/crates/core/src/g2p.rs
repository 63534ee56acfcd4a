//! Joint-sequence (graphone) grapheme-to-phoneme model.
//!
//! Training aligns every (spelling, pronunciation) pair into graphones with EM
//! over all monotone segmentations, takes the Viterbi segmentation of each
//! pair, and fits a Kneser-Ney n-gram over the resulting graphone sequences.
//! Graphones have at most two graphemes and two phones, never both empty, and
//! two grapheme-less graphones never follow each other.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::lexicon::{PhoneSet, Pronunciation};
use crate::metrics::edit_distance;
use crate::ngram::{count_ngrams, estimate_kneser_ney, parse_arpa, to_arpa_string, KneserNeyLm, LmScorer};
use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_EM_ITERATIONS: usize = 10;
pub const DEFAULT_BEAM: usize = 16;
const MAX_SIDE: usize = 2;
const MODEL_MAGIC: &str = "g2p-graphone-model v1";

/// A grapheme chunk paired with a phone chunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Graphone {
    pub graphemes: String,
    pub phones: Vec<String>,
}

impl Graphone {
    pub fn new(graphemes: &str, phones: &[&str]) -> Self {
        Graphone {
            graphemes: graphemes.to_string(),
            phones: phones.iter().map(|p| p.to_string()).collect(),
        }
    }
}

impl fmt::Display for Graphone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.graphemes, self.phones.join("_"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2pTrainConfig {
    pub order: usize,
    pub em_iterations: usize,
    pub discount: f64,
}

impl Default for G2pTrainConfig {
    fn default() -> Self {
        G2pTrainConfig {
            order: DEFAULT_ORDER,
            em_iterations: DEFAULT_EM_ITERATIONS,
            discount: crate::ngram::DEFAULT_DISCOUNT,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainingReport {
    /// Natural-log data likelihood before each EM iteration, then after the last.
    pub log_likelihoods: Vec<f64>,
    /// (index into the input, reason) for every pair left out of training.
    pub rejected: Vec<(usize, String)>,
    /// Viterbi segmentation of each accepted pair, in input order.
    pub segmentations: Vec<Vec<Graphone>>,
}

impl TrainingReport {
    pub fn likelihood_non_decreasing(&self) -> bool {
        self.log_likelihoods
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0))
    }
}

/// Trained graphone model.
#[derive(Debug, Clone)]
pub struct GraphoneModel {
    inventory: Vec<Graphone>,
    alignment_probs: Vec<f64>,
    order: usize,
    lm: KneserNeyLm,
    phone_set: PhoneSet,
    /// Graphones usable in transduction (those in the n-gram vocabulary), by grapheme chunk.
    by_graphemes: HashMap<String, Vec<usize>>,
    tokens: Vec<String>,
}

struct Lattice {
    graphemes: Vec<char>,
    phones: Vec<String>,
}

// Lattice state: (grapheme pos, phone pos, previous unit had no graphemes).
type State = (usize, usize, bool);

impl Lattice {
    fn states(&self) -> Vec<State> {
        let mut v = Vec::new();
        for i in 0..=self.graphemes.len() {
            for j in 0..=self.phones.len() {
                v.push((i, j, false));
                v.push((i, j, true));
            }
        }
        v
    }

    fn edges(&self, (i, j, eps): State) -> impl Iterator<Item = (usize, usize, Graphone)> + '_ {
        let (g, p) = (self.graphemes.len(), self.phones.len());
        (0..=MAX_SIDE).flat_map(move |a| {
            (0..=MAX_SIDE).filter_map(move |b| {
                if (a == 0 && b == 0) || i + a > g || j + b > p || (a == 0 && eps) {
                    return None;
                }
                let gr = Graphone {
                    graphemes: self.graphemes[i..i + a].iter().collect(),
                    phones: self.phones[j..j + b].to_vec(),
                };
                Some((a, b, gr))
            })
        })
    }
}

fn state_index(s: State, p: usize) -> usize {
    (s.0 * (p + 1) + s.1) * 2 + s.2 as usize
}

fn token(idx: usize) -> String {
    format!("g{idx}")
}

impl GraphoneModel {
    /// Trains on `(spelling, pronunciation)` pairs. Pairs with an empty side
    /// are rejected and listed in the report.
    pub fn train(
        pairs: &[(String, Pronunciation)],
        cfg: G2pTrainConfig,
    ) -> Result<(GraphoneModel, TrainingReport)> {
        if !(1..=5).contains(&cfg.order) {
            return Err(Error::InvalidArgument(format!("order {} outside [1,5]", cfg.order)));
        }
        if cfg.em_iterations == 0 {
            return Err(Error::InvalidArgument("em_iterations must be at least 1".into()));
        }
        let mut report = TrainingReport::default();
        let mut lattices = Vec::new();
        for (i, (word, pron)) in pairs.iter().enumerate() {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                report.rejected.push((i, "empty or whitespace-containing spelling".into()));
            } else if pron.is_empty() {
                report.rejected.push((i, "empty pronunciation".into()));
            } else {
                lattices.push(Lattice {
                    graphemes: word.chars().collect(),
                    phones: pron.phones().to_vec(),
                });
            }
        }
        if lattices.is_empty() {
            return Err(Error::InvalidArgument("no usable training pairs".into()));
        }

        let mut set = BTreeSet::new();
        for lat in &lattices {
            for s in lat.states() {
                for (_, _, g) in lat.edges(s) {
                    set.insert(g);
                }
            }
        }
        let inventory: Vec<Graphone> = set.into_iter().collect();
        let index: HashMap<&Graphone, usize> = inventory.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let mut probs = vec![1.0 / inventory.len() as f64; inventory.len()];

        for _ in 0..cfg.em_iterations {
            let mut counts = vec![0.0; inventory.len()];
            let mut ll = 0.0;
            for lat in &lattices {
                ll += forward_backward(lat, &probs, &index, Some(&mut counts));
            }
            report.log_likelihoods.push(ll);
            let total: f64 = counts.iter().sum();
            for (p, c) in probs.iter_mut().zip(&counts) {
                *p = c / total;
            }
        }
        let final_ll: f64 = lattices
            .iter()
            .map(|lat| forward_backward(lat, &probs, &index, None))
            .sum();
        report.log_likelihoods.push(final_ll);
        debug_assert!(report.likelihood_non_decreasing(), "{:?}", report.log_likelihoods);

        let mut sequences = Vec::with_capacity(lattices.len());
        for lat in &lattices {
            let seg = viterbi(lat, &probs, &index);
            sequences.push(Sentence::from_valid(seg.iter().map(|g| token(index[g])).collect()));
            report.segmentations.push(seg);
        }
        let lm = estimate_kneser_ney(&count_ngrams(&sequences, cfg.order)?, cfg.discount)?;

        let phone_set = PhoneSet::new(
            lattices
                .iter()
                .flat_map(|l| l.phones.iter().cloned())
                .collect::<BTreeSet<_>>(),
        )?;
        let model = GraphoneModel::assemble(inventory, probs, cfg.order, lm, phone_set);
        Ok((model, report))
    }

    fn assemble(
        inventory: Vec<Graphone>,
        alignment_probs: Vec<f64>,
        order: usize,
        lm: KneserNeyLm,
        phone_set: PhoneSet,
    ) -> Self {
        let tokens: Vec<String> = (0..inventory.len()).map(token).collect();
        let mut by_graphemes: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, g) in inventory.iter().enumerate() {
            if lm.contains(&tokens[i]) {
                by_graphemes.entry(g.graphemes.clone()).or_default().push(i);
            }
        }
        GraphoneModel {
            inventory,
            alignment_probs,
            order,
            lm,
            phone_set,
            by_graphemes,
            tokens,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn inventory(&self) -> &[Graphone] {
        &self.inventory
    }

    pub fn alignment_prob(&self, g: &Graphone) -> f64 {
        self.inventory
            .binary_search(g)
            .map_or(0.0, |i| self.alignment_probs[i])
    }

    pub fn alignment_probs(&self) -> &[f64] {
        &self.alignment_probs
    }

    pub fn phone_set(&self) -> &PhoneSet {
        &self.phone_set
    }

    /// Graphones available to [`transduce`](Self::transduce), in inventory order.
    pub fn active_graphones(&self) -> Vec<&Graphone> {
        let mut ids: Vec<usize> = self.by_graphemes.values().flatten().copied().collect();
        ids.sort_unstable();
        ids.into_iter().map(|i| &self.inventory[i]).collect()
    }

    /// log10 score of a graphone sequence under the n-gram, end symbol included.
    /// Graphones outside the active set score as unknown.
    pub fn sequence_score(&self, seq: &[Graphone]) -> f64 {
        let toks: Vec<String> = seq
            .iter()
            .map(|g| match self.inventory.binary_search(g) {
                Ok(i) => self.tokens[i].clone(),
                Err(_) => crate::ngram::UNKNOWN.to_string(),
            })
            .collect();
        LmScorer::score_sentence(&self.lm, &Sentence::from_valid(toks))
    }

    /// Best graphone sequence spelling `word`, with its score.
    pub fn transduce_scored(&self, word: &str, beam: usize) -> Result<(Vec<Graphone>, f64)> {
        if beam == 0 {
            return Err(Error::InvalidArgument("beam must be at least 1".into()));
        }
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len();

        #[derive(Clone)]
        struct Hyp {
            seq: Vec<usize>,
            phones: Vec<String>,
            score: f64,
            last_eps: bool,
        }
        let extend = |h: &Hyp, g: usize| -> Hyp {
            let hist: Vec<&str> = h.seq.iter().map(|&i| self.tokens[i].as_str()).collect();
            let mut seq = h.seq.clone();
            seq.push(g);
            let mut phones = h.phones.clone();
            phones.extend(self.inventory[g].phones.iter().cloned());
            Hyp {
                score: h.score + LmScorer::log10_prob(&self.lm, &hist, &self.tokens[g]),
                seq,
                phones,
                last_eps: self.inventory[g].graphemes.is_empty(),
            }
        };
        let rank = |a: &Hyp, b: &Hyp| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.phones.cmp(&b.phones))
                .then_with(|| a.seq.cmp(&b.seq))
        };
        let empty = Vec::new();
        let eps_units = self.by_graphemes.get("").unwrap_or(&empty);

        let mut buckets: Vec<Vec<Hyp>> = vec![Vec::new(); n + 1];
        buckets[0].push(Hyp {
            seq: Vec::new(),
            phones: Vec::new(),
            score: 0.0,
            last_eps: false,
        });
        for i in 0..=n {
            let mut here = std::mem::take(&mut buckets[i]);
            let inserted: Vec<Hyp> = here
                .iter()
                .filter(|h| !h.last_eps)
                .flat_map(|h| eps_units.iter().map(move |&g| (h, g)))
                .map(|(h, g)| extend(h, g))
                .collect();
            here.extend(inserted);
            here.sort_by(rank);
            here.truncate(beam);
            if i == n {
                let mut finals: Vec<Hyp> = here
                    .into_iter()
                    .filter(|h| !h.phones.is_empty())
                    .map(|mut h| {
                        let hist: Vec<&str> = h.seq.iter().map(|&i| self.tokens[i].as_str()).collect();
                        h.score += LmScorer::log10_end(&self.lm, &hist);
                        h
                    })
                    .collect();
                finals.sort_by(rank);
                return match finals.into_iter().next() {
                    Some(h) if n > 0 => {
                        let seq = h.seq.iter().map(|&i| self.inventory[i].clone()).collect();
                        Ok((seq, h.score))
                    }
                    _ => Err(Error::NoPath(word.to_string())),
                };
            }
            for h in &here {
                for a in 1..=MAX_SIDE.min(n - i) {
                    let chunk: String = chars[i..i + a].iter().collect();
                    if let Some(units) = self.by_graphemes.get(&chunk) {
                        for &g in units {
                            buckets[i + a].push(extend(h, g));
                        }
                    }
                }
            }
        }
        unreachable!("loop returns at i == n")
    }

    /// Pronunciation of `word`: the phone side of the best-scoring graphone
    /// sequence found with the given beam.
    pub fn transduce(&self, word: &str, beam: usize) -> Result<Pronunciation> {
        let (seq, _) = self.transduce_scored(word, beam)?;
        Pronunciation::new(seq.into_iter().flat_map(|g| g.phones).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MODEL_MAGIC}\norder {}\ngraphones {}\n", self.order, self.inventory.len());
        for (g, p) in self.inventory.iter().zip(&self.alignment_probs) {
            s.push_str(&format!("{}\t{}\t{:e}\n", g.graphemes, g.phones.join(" "), p));
        }
        s.push_str("phones ");
        s.push_str(&self.phone_set.symbols().join(" "));
        s.push_str("\narpa\n");
        s.push_str(&to_arpa_string(&self.lm));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const WHAT: &str = "g2p model";
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::parse(WHAT, 0, format!("unexpected end, expected {expect}")))
        };
        let (ln, magic) = next("header")?;
        if magic != MODEL_MAGIC {
            return Err(Error::parse(WHAT, ln, "bad header"));
        }
        let (ln, l) = next("order")?;
        let order: usize = l
            .strip_prefix("order ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(WHAT, ln, "expected order N"))?;
        let (ln, l) = next("graphones")?;
        let count: usize = l
            .strip_prefix("graphones ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse(WHAT, ln, "expected graphones N"))?;
        let mut inventory = Vec::with_capacity(count);
        let mut probs = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, l) = next("graphone")?;
            let cols: Vec<&str> = l.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(WHAT, ln, "expected graphemes TAB phones TAB prob"));
            }
            inventory.push(Graphone {
                graphemes: cols[0].to_string(),
                phones: cols[1].split_whitespace().map(str::to_string).collect(),
            });
            probs.push(cols[2].parse().map_err(|_| Error::parse(WHAT, ln, "bad probability"))?);
        }
        if inventory.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::parse(WHAT, 0, "graphone inventory not sorted"));
        }
        let (ln, l) = next("phones")?;
        let phones = l
            .strip_prefix("phones")
            .ok_or_else(|| Error::parse(WHAT, ln, "expected phones line"))?;
        let phone_set = PhoneSet::new(phones.split_whitespace().map(str::to_string))?;
        let (ln, l) = next("arpa")?;
        if l != "arpa" {
            return Err(Error::parse(WHAT, ln, "expected arpa marker"));
        }
        let rest: Vec<&str> = lines.map(|(_, l)| l).collect();
        let lm = parse_arpa(&rest.join("\n"))?;
        Ok(GraphoneModel::assemble(inventory, probs, order, lm, phone_set))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_to_string(path)?)
    }
}

fn forward_backward(
    lat: &Lattice,
    probs: &[f64],
    index: &HashMap<&Graphone, usize>,
    counts: Option<&mut Vec<f64>>,
) -> f64 {
    let p = lat.phones.len();
    let states = lat.states();
    let mut alpha = vec![0.0; states.len()];
    alpha[state_index((0, 0, false), p)] = 1.0;
    for &s in &states {
        let a = alpha[state_index(s, p)];
        if a == 0.0 {
            continue;
        }
        for (da, db, g) in lat.edges(s) {
            let t = (s.0 + da, s.1 + db, da == 0);
            alpha[state_index(t, p)] += a * probs[index[&g]];
        }
    }
    let (gl, pl) = (lat.graphemes.len(), p);
    let z = alpha[state_index((gl, pl, false), p)] + alpha[state_index((gl, pl, true), p)];
    if let Some(counts) = counts {
        let mut beta = vec![0.0; states.len()];
        beta[state_index((gl, pl, false), p)] = 1.0;
        beta[state_index((gl, pl, true), p)] = 1.0;
        for &s in states.iter().rev() {
            let mut b = beta[state_index(s, p)];
            for (da, db, g) in lat.edges(s) {
                let t = (s.0 + da, s.1 + db, da == 0);
                let k = index[&g];
                let contrib = probs[k] * beta[state_index(t, p)];
                b += contrib;
                counts[k] += alpha[state_index(s, p)] * contrib / z;
            }
            beta[state_index(s, p)] = b;
        }
    }
    z.ln()
}

fn viterbi(lat: &Lattice, probs: &[f64], index: &HashMap<&Graphone, usize>) -> Vec<Graphone> {
    let p = lat.phones.len();
    let states = lat.states();
    let mut best = vec![f64::NEG_INFINITY; states.len()];
    let mut back: Vec<Option<(State, Graphone)>> = vec![None; states.len()];
    best[state_index((0, 0, false), p)] = 0.0;
    for &s in &states {
        let b = best[state_index(s, p)];
        if b == f64::NEG_INFINITY {
            continue;
        }
        for (da, db, g) in lat.edges(s) {
            let t = (s.0 + da, s.1 + db, da == 0);
            let score = b + probs[index[&g]].ln();
            let ti = state_index(t, p);
            if score > best[ti] {
                best[ti] = score;
                back[ti] = Some((s, g));
            }
        }
    }
    let (gl, pl) = (lat.graphemes.len(), p);
    let end_f = state_index((gl, pl, false), p);
    let end_t = state_index((gl, pl, true), p);
    let mut s = if best[end_f] >= best[end_t] { (gl, pl, false) } else { (gl, pl, true) };
    let mut seq = Vec::new();
    while let Some((prev, g)) = back[state_index(s, p)].clone() {
        seq.push(g);
        s = prev;
    }
    seq.reverse();
    seq
}

/// The six evaluation categories of the G2P test harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    SecondPersonPlural,
    SecondPersonSingular,
    Diminution,
    Shortening,
    Translation,
    Variability,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::SecondPersonPlural,
        Category::SecondPersonSingular,
        Category::Diminution,
        Category::Shortening,
        Category::Translation,
        Category::Variability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::SecondPersonPlural => "2nd person plural",
            Category::SecondPersonSingular => "2nd person sing",
            Category::Diminution => "Diminuation",
            Category::Shortening => "Shortening",
            Category::Translation => "Translation",
            Category::Variability => "Variability",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown G2P category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2pTestCase {
    pub category: Category,
    pub word: String,
    pub expected_phones: Pronunciation,
}

/// A row of a training or harness file; the category column is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct PronunciationRow {
    pub category: Option<Category>,
    pub word: String,
    pub phones: Pronunciation,
}

/// Parses `[category TAB] word TAB phone phone ...` lines.
pub fn parse_pronunciation_rows(text: &str) -> Result<Vec<PronunciationRow>> {
    const WHAT: &str = "pronunciation file";
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let (category, word, phones) = match cols.as_slice() {
            [w, p] => (None, *w, *p),
            [c, w, p] => (
                Some(c.parse().map_err(|_| Error::parse(WHAT, i + 1, format!("unknown category {c:?}")))?),
                *w,
                *p,
            ),
            _ => return Err(Error::parse(WHAT, i + 1, "expected 2 or 3 TAB-separated columns")),
        };
        let phones = Pronunciation::new(phones.split_whitespace().map(str::to_string).collect())
            .map_err(|e| Error::parse(WHAT, i + 1, e.to_string()))?;
        out.push(PronunciationRow {
            category,
            word: word.trim().to_lowercase(),
            phones,
        });
    }
    Ok(out)
}

pub fn read_pronunciation_rows(path: &Path) -> Result<Vec<PronunciationRow>> {
    parse_pronunciation_rows(&read_to_string(path)?)
}

pub fn parse_harness(text: &str) -> Result<Vec<G2pTestCase>> {
    parse_pronunciation_rows(text)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(G2pTestCase {
                category: r
                    .category
                    .ok_or_else(|| Error::parse("G2P harness", i + 1, "missing category"))?,
                word: r.word,
                expected_phones: r.phones,
            })
        })
        .collect()
}

/// Per-category phone error rate in percent. A word without a graphone path
/// counts all of its expected phones as deletions.
pub fn evaluate_per(model: &GraphoneModel, cases: &[G2pTestCase], beam: usize) -> Result<BTreeMap<Category, f64>> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no test cases".into()));
    }
    let mut tallies: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for case in cases {
        let expected = case.expected_phones.phones();
        let errors = match model.transduce(&case.word, beam) {
            Ok(pred) => edit_distance(expected, pred.phones()),
            Err(Error::NoPath(_)) => expected.len(),
            Err(e) => return Err(e),
        };
        let t = tallies.entry(case.category).or_insert((0, 0));
        t.0 += errors;
        t.1 += expected.len();
    }
    Ok(tallies
        .into_iter()
        .map(|(c, (e, n))| (c, 100.0 * e as f64 / n as f64))
        .collect())
}

pub fn per_report_tsv(per: &BTreeMap<Category, f64>) -> String {
    per.iter().map(|(c, v)| format!("{c}\t{v:.2}\n")).collect()
}
