//! Rule-based stand-in for dialect speech data.
//!
//! Standard-language sentences come from a small grammar with subject/verb
//! agreement. The dialect side is produced by word translations, suffix
//! rewrites and contractions (the clitics), and every dialect word is
//! pronounced with a fixed letter-to-phone table that includes final
//! devoicing. Two spellings can therefore sound the same (`händ` for "haben",
//! `hänt` for "habt"), which is what leaves work for a second-pass LM.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use dialex::corpus::{tokenize, write_monolingual};
use dialex::decoder::simulate_posteriors;
use dialex::g2p::Category;
use dialex::lexicon::{CliticEntry, CliticInventory};
use dialex::{EmbeddingTable, ParallelCorpus, PhoneSet, PosteriorMatrix, Pronunciation, Sentence};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{CliError, Result};

/// Dimension of the generated word vectors.
pub const EMBEDDING_DIM: usize = 16;

/// A standard word and its dialect spelling.
#[derive(Debug, Clone, PartialEq)]
pub struct WordRule {
    pub standard: String,
    pub dialect: String,
    pub category: Category,
}

/// Adjacent standard words fused into one dialect form.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    pub standard: Vec<String>,
    pub dialect: String,
    pub category: Category,
}

/// A subject phrase with the auxiliary and modal forms that agree with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub phrase: String,
    pub aux: String,
    pub modal: String,
}

/// Sentence templates are filled from these slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    pub subjects: Vec<Subject>,
    /// Noun phrases, space separated.
    pub objects: Vec<String>,
    pub participles: Vec<String>,
    /// Complements of the modal.
    pub infinitives: Vec<String>,
    /// Sentence-initial adverbs (verb-second order follows).
    pub topics: Vec<String>,
    /// Optional adverbs before the participle.
    pub particles: Vec<String>,
    /// Conjunctions that open a verb-final clause.
    pub subordinators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDialectSpec {
    pub seed: u64,
    pub grammar: Grammar,
    pub translations: Vec<WordRule>,
    /// Applied to words without a translation, first match wins.
    pub suffix_rewrites: Vec<(String, String)>,
    pub contractions: Vec<Contraction>,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl SyntheticDialectSpec {
    /// The bundled Swiss-German-flavoured rule set.
    pub fn bundled(seed: u64) -> Self {
        use Category::*;
        let rule = |s: &str, d: &str, c: Category| WordRule {
            standard: s.into(),
            dialect: d.into(),
            category: c,
        };
        let contraction = |s: &[&str], d: &str, c: Category| Contraction {
            standard: strings(s),
            dialect: d.into(),
            category: c,
        };
        SyntheticDialectSpec {
            seed,
            grammar: Grammar {
                subjects: [
                    ("ich", "habe", "will"),
                    ("du", "hast", "willst"),
                    ("er", "hat", "will"),
                    ("wir", "haben", "wollen"),
                    ("ihr", "habt", "wollt"),
                    ("sie", "haben", "wollen"),
                    ("der mann", "hat", "will"),
                    ("der hund", "hat", "will"),
                    ("die frau", "hat", "will"),
                    ("die leute", "haben", "wollen"),
                    ("die kinder", "haben", "wollen"),
                ]
                .iter()
                .map(|(s, a, m)| Subject {
                    phrase: s.to_string(),
                    aux: a.to_string(),
                    modal: m.to_string(),
                })
                .collect(),
                objects: strings(&[
                    "das bier",
                    "den kaffee",
                    "die suppe",
                    "das brot",
                    "das brötchen",
                    "den apfel",
                    "den apfelkuchen",
                    "den kuchen",
                    "das glas",
                    "das bierglas",
                    "das gläschen",
                    "die zeitung",
                    "das haus",
                    "das häuschen",
                    "den becher",
                    "den kaffeebecher",
                    "die milch",
                    "das fenster",
                    "den mann",
                ]),
                participles: strings(&[
                    "gesagt", "gemacht", "getrunken", "gegessen", "gesehen", "gekauft", "gebracht", "geholt",
                    "gelesen", "gewaschen",
                ]),
                infinitives: strings(&[
                    "trinken", "essen", "sehen", "kaufen", "holen", "lesen", "waschen", "machen", "sagen", "bringen",
                ]),
                topics: strings(&["gestern", "heute", "dann", "morgen"]),
                particles: strings(&["nicht", "schon", "auch", "oft"]),
                subordinators: strings(&["dass", "weil", "ob"]),
            },
            translations: vec![
                rule("wir", "mir", Translation),
                rule("ihr", "ier", SecondPersonPlural),
                rule("sie", "si", Shortening),
                rule("habe", "ha", Shortening),
                rule("hast", "häsch", SecondPersonSingular),
                rule("hat", "het", Translation),
                rule("haben", "händ", Translation),
                rule("habt", "hänt", SecondPersonPlural),
                rule("den", "de", Shortening),
                rule("der", "dr", Shortening),
                rule("mann", "maa", Translation),
                rule("leute", "lüt", Translation),
                rule("kinder", "chinde", Translation),
                rule("will", "wott", Translation),
                rule("willst", "wotsch", SecondPersonSingular),
                rule("wollen", "wänd", Translation),
                rule("wollt", "wend", SecondPersonPlural),
                rule("die", "di", Shortening),
                rule("kaffee", "kafi", Translation),
                rule("brötchen", "brötli", Diminution),
                rule("apfel", "öpfel", Translation),
                rule("apfelkuchen", "öpfelchueche", Translation),
                rule("kuchen", "chueche", Translation),
                rule("gläschen", "gläsli", Diminution),
                rule("zeitung", "zitig", Translation),
                rule("haus", "huus", Translation),
                rule("häuschen", "hüsli", Diminution),
                rule("kaffeebecher", "kafibecher", Translation),
                rule("gesagt", "gseit", Translation),
                rule("gemacht", "gmacht", Shortening),
                rule("gekauft", "kauft", Shortening),
                rule("gebracht", "brocht", Translation),
                rule("geholt", "gholt", Shortening),
                rule("gestern", "geschter", Translation),
                rule("heute", "hüt", Translation),
                rule("dann", "denn", Translation),
                rule("morgen", "morn", Translation),
                rule("nicht", "nöd", Translation),
                rule("schon", "scho", Shortening),
                rule("auch", "au", Shortening),
                rule("weil", "wil", Shortening),
                rule("ob", "öb", Translation),
            ],
            suffix_rewrites: vec![("en".into(), "e".into())],
            contractions: vec![
                contraction(&["haben", "wir"], "hemmer", Translation),
                contraction(&["habt", "ihr"], "hender", SecondPersonPlural),
                contraction(&["hast", "du"], "hesch", SecondPersonSingular),
                contraction(&["hat", "er"], "hetter", Translation),
                contraction(&["haben", "sie"], "hends", Translation),
            ],
        }
    }

    /// Every word the grammar can produce, sorted.
    pub fn base_vocab(&self) -> Vec<String> {
        let g = &self.grammar;
        let mut v: BTreeSet<String> = BTreeSet::new();
        for s in &g.subjects {
            v.extend(s.phrase.split_whitespace().map(str::to_string));
            v.insert(s.aux.clone());
            v.insert(s.modal.clone());
        }
        let slots = [&g.objects, &g.participles, &g.infinitives, &g.topics, &g.particles, &g.subordinators];
        for phrase in slots.into_iter().flatten() {
            v.extend(phrase.split_whitespace().map(str::to_string));
        }
        v.into_iter().collect()
    }

    /// Dialect spelling of a single standard word and the rule that produced it.
    pub fn render_word(&self, word: &str) -> (String, Category) {
        if let Some(r) = self.translations.iter().find(|r| r.standard == word) {
            return (r.dialect.clone(), r.category);
        }
        for (from, to) in &self.suffix_rewrites {
            if word.len() > from.len() && word.ends_with(from.as_str()) {
                return (format!("{}{to}", &word[..word.len() - from.len()]), Category::Shortening);
            }
        }
        (word.to_string(), Category::Variability)
    }

    /// Contractions first (leftmost match), then word by word.
    pub fn to_dialect(&self, standard: &Sentence) -> Sentence {
        let words = standard.tokens();
        let mut out = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            if let Some(c) = self.contractions.iter().find(|c| words[i..].starts_with(&c.standard)) {
                out.push(c.dialect.clone());
                i += c.standard.len();
            } else {
                out.push(self.render_word(&words[i]).0);
                i += 1;
            }
        }
        Sentence::new(out).expect("rendered words are non-empty")
    }

    /// Every dialect form: (spelling, standard words it stands for, category).
    pub fn dialect_forms(&self) -> Vec<(String, Vec<String>, Category)> {
        let mut forms: Vec<(String, Vec<String>, Category)> = self
            .base_vocab()
            .into_iter()
            .map(|w| {
                let (d, c) = self.render_word(&w);
                (d, vec![w], c)
            })
            .collect();
        for c in &self.contractions {
            forms.push((c.dialect.clone(), c.standard.clone(), c.category));
        }
        forms.sort();
        forms
    }

    /// Checks that every dialect form maps back to exactly one standard form
    /// and that every contraction is made of grammar words.
    pub fn validate(&self) -> Result<()> {
        let vocab: BTreeSet<String> = self.base_vocab().into_iter().collect();
        let mut back: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (d, std, _) in self.dialect_forms() {
            let prev = back.insert(d.clone(), std.clone());
            if let Some(p) = prev {
                return Err(CliError::Validation(format!(
                    "dialect form {d:?} maps back to both {:?} and {:?}",
                    p.join(" "),
                    std.join(" ")
                )));
            }
            pronounce(&d)?;
        }
        for c in &self.contractions {
            if c.standard.len() < 2 || c.standard.iter().any(|w| !vocab.contains(w)) {
                return Err(CliError::Validation(format!(
                    "contraction {} must join at least two grammar words",
                    c.dialect
                )));
            }
        }
        let g = &self.grammar;
        if g.subjects.is_empty()
            || g.objects.is_empty()
            || g.participles.is_empty()
            || g.infinitives.is_empty()
            || g.topics.is_empty()
            || g.subordinators.is_empty()
        {
            return Err(CliError::Validation("every grammar slot except particles needs a word".into()));
        }
        Ok(())
    }

    /// One standard sentence from one of six templates: perfect tense in
    /// subject-first, object-first, topic-first and verb-final order, and a
    /// modal with an infinitive in subject-first and verb-final order.
    pub fn sample_standard(&self, rng: &mut ChaCha8Rng) -> Sentence {
        let g = &self.grammar;
        let subj = g.subjects.choose(rng).expect("subjects");
        let s = subj.phrase.as_str();
        let obj = g.objects.choose(rng).expect("objects").as_str();
        let particle = if !g.particles.is_empty() && rng.gen_bool(0.4) {
            g.particles.choose(rng).map(String::as_str)
        } else {
            None
        };
        let template = rng.gen_range(0..12);
        let (verb, last) = if template < 8 {
            (subj.aux.as_str(), g.participles.choose(rng).expect("participles").as_str())
        } else {
            (subj.modal.as_str(), g.infinitives.choose(rng).expect("infinitives").as_str())
        };
        let mut w: Vec<&str> = Vec::new();
        let verb_final = match template {
            0..=1 | 8..=9 => {
                w.extend([s, verb, obj]);
                false
            }
            2..=3 => {
                w.extend([obj, verb, s]);
                false
            }
            4..=5 => {
                w.extend([g.topics.choose(rng).expect("topics").as_str(), verb, s, obj]);
                false
            }
            _ => {
                w.extend([g.subordinators.choose(rng).expect("subordinators").as_str(), s, obj]);
                true
            }
        };
        w.extend(particle);
        w.push(last);
        if verb_final {
            w.push(verb);
        }
        tokenize(&w.join(" "))
    }
}

const GROUPS: &[(&str, &[&str])] = &[
    ("ch", &["x"]),
    ("ei", &["ai"]),
    ("ie", &["i:"]),
    ("ue", &["u", "ax"]),
    ("aa", &["a:"]),
    ("ee", &["e:"]),
    ("oo", &["o:"]),
    ("uu", &["u:"]),
    ("ff", &["f"]),
    ("ll", &["l"]),
    ("mm", &["m"]),
    ("nn", &["n"]),
    ("pp", &["p"]),
    ("ss", &["s"]),
    ("tt", &["t"]),
];

fn letter_phone(c: char) -> Option<&'static str> {
    Some(match c {
        'a' => "a",
        'ä' => "ae",
        'b' => "b",
        'c' | 'k' | 'q' => "k",
        'd' => "d",
        'e' => "e",
        'f' | 'v' => "f",
        'g' => "g",
        'h' => "h",
        'i' | 'y' => "i",
        'j' => "j",
        'l' => "l",
        'm' => "m",
        'n' => "n",
        'o' => "o",
        'ö' => "oe",
        'p' => "p",
        'r' => "r",
        's' => "s",
        't' => "t",
        'u' => "u",
        'ü' => "y",
        'w' => "v",
        'z' => "ts",
        _ => return None,
    })
}

/// Pronunciation of a dialect spelling: letter groups first, then single
/// letters; a final b, d or g is devoiced.
pub fn pronounce(word: &str) -> Result<Pronunciation> {
    let chars: Vec<char> = word.chars().collect();
    let mut phones: Vec<String> = Vec::new();
    let mut i = 0;
    let mut last_single = None;
    while i < chars.len() {
        let rest: String = chars[i..].iter().collect();
        if let Some((g, p)) = GROUPS.iter().find(|(g, _)| rest.starts_with(g)) {
            phones.extend(p.iter().map(|s| s.to_string()));
            i += g.chars().count();
            last_single = None;
            continue;
        }
        let p = letter_phone(chars[i])
            .ok_or_else(|| CliError::Validation(format!("no phone for {:?} in {word:?}", chars[i])))?;
        phones.push(p.to_string());
        last_single = Some(chars[i]);
        i += 1;
    }
    if let Some(c) = last_single {
        let devoiced = match c {
            'b' => Some("p"),
            'd' => Some("t"),
            'g' => Some("k"),
            _ => None,
        };
        if let Some(d) = devoiced {
            *phones.last_mut().expect("non-empty") = d.to_string();
        }
    }
    Pronunciation::new(phones).map_err(|e| CliError::Validation(format!("{word:?}: {e}")))
}

/// Sizes and acoustic settings of one generated data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSizes {
    pub train_sentences: usize,
    pub lm_sentences: usize,
    pub test_sentences: usize,
    pub noise: f64,
    pub frames_per_phone: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestUtterance {
    pub id: String,
    pub dialect: Sentence,
    pub reference: Sentence,
    /// True pronunciation of each dialect word.
    pub phones: Vec<Pronunciation>,
    pub posteriors: PosteriorMatrix,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub parallel: ParallelCorpus,
    /// Standard text for the language models: the standard side of the
    /// parallel corpus plus extra sentences.
    pub lm_text: Vec<Sentence>,
    /// Every dialect form with its category and true pronunciation.
    pub pronunciations: Vec<(Category, String, Pronunciation)>,
    pub clitics: CliticInventory,
    pub embeddings: EmbeddingTable,
    pub phone_set: PhoneSet,
    pub test: Vec<TestUtterance>,
}

/// Deterministic corpus for `spec` (same spec and sizes, same output).
pub fn generate_synthetic(spec: &SyntheticDialectSpec, sizes: &SyntheticSizes) -> Result<SyntheticCorpus> {
    spec.validate()?;
    if sizes.train_sentences == 0 {
        return Err(CliError::Validation("train_sentences must be at least 1".into()));
    }
    if sizes.test_sentences == 0 {
        return Err(CliError::Validation("test_sentences must be at least 1".into()));
    }
    let bad = |e: dialex::Error| CliError::Validation(e.to_string());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs: Vec<(Sentence, Sentence)> = (0..sizes.train_sentences)
        .map(|_| {
            let s = spec.sample_standard(&mut rng);
            (spec.to_dialect(&s), s)
        })
        .collect();
    let mut lm_text: Vec<Sentence> = pairs.iter().map(|(_, s)| s.clone()).collect();
    let mut lm_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    lm_text.extend((0..sizes.lm_sentences).map(|_| spec.sample_standard(&mut lm_rng)));

    let forms = spec.dialect_forms();
    let mut pronunciations = Vec::with_capacity(forms.len());
    let mut phones = BTreeSet::new();
    for (d, _, c) in &forms {
        let p = pronounce(d)?;
        phones.extend(p.phones().iter().cloned());
        pronunciations.push((*c, d.clone(), p));
    }
    let phone_set = PhoneSet::new(phones).map_err(bad)?;
    let by_dialect: BTreeMap<&str, &Pronunciation> =
        pronunciations.iter().map(|(_, d, p)| (d.as_str(), p)).collect();

    let clitics = CliticInventory::new(
        spec.contractions
            .iter()
            .map(|c| {
                let parts: Vec<&str> = c.standard.iter().map(String::as_str).collect();
                CliticEntry::new(&c.dialect, &parts)
            })
            .collect::<dialex::Result<_>>()
            .map_err(bad)?,
    );

    // Meaning vectors per standard word; a dialect form sits near the sum of
    // the meanings it stands for.
    let mut emb_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(2));
    let meanings: BTreeMap<String, Vec<f64>> = spec
        .base_vocab()
        .into_iter()
        .map(|w| {
            let v = (0..EMBEDDING_DIM).map(|_| emb_rng.gen_range(-1.0..1.0)).collect();
            (w, v)
        })
        .collect();
    let mut embeddings = EmbeddingTable::new(EMBEDDING_DIM).map_err(bad)?;
    for (d, std, _) in &forms {
        let mut v = vec![0.0; EMBEDDING_DIM];
        for w in std {
            for (x, m) in v.iter_mut().zip(&meanings[w]) {
                *x += m;
            }
        }
        for x in v.iter_mut() {
            *x += 0.1 * emb_rng.gen_range(-1.0..1.0);
        }
        embeddings.insert(d, v).map_err(bad)?;
    }

    let mut test_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(3));
    let test = (0..sizes.test_sentences)
        .map(|i| {
            let reference = spec.sample_standard(&mut test_rng);
            let dialect = spec.to_dialect(&reference);
            let phones: Vec<Pronunciation> = dialect.iter().map(|w| by_dialect[w.as_str()].clone()).collect();
            let seed = spec.seed.wrapping_add(1000 + i as u64);
            let posteriors = simulate_posteriors(&phone_set, &phones, sizes.frames_per_phone, sizes.noise, seed)
                .map_err(bad)?;
            Ok(TestUtterance {
                id: format!("utt{i:04}"),
                dialect,
                reference,
                phones,
                posteriors,
            })
        })
        .collect::<Result<_>>()?;

    Ok(SyntheticCorpus {
        parallel: ParallelCorpus::new(pairs).map_err(bad)?,
        lm_text,
        pronunciations,
        clitics,
        embeddings,
        phone_set,
        test,
    })
}

/// File names inside a synthetic data directory.
pub mod files {
    pub const PARALLEL: &str = "parallel.tsv";
    pub const LM_TEXT: &str = "lm_text.txt";
    pub const PRONUNCIATIONS: &str = "pronunciations.tsv";
    pub const CLITICS: &str = "clitics.tsv";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const TEST: &str = "test.tsv";
    pub const POSTERIOR_DIR: &str = "posteriors";
}

/// Writes the corpus under `dir` and returns the written paths in order.
pub fn write_synthetic(corpus: &SyntheticCorpus, dir: &Path) -> dialex::Result<Vec<std::path::PathBuf>> {
    use files::*;
    let write = |name: &str, text: &str| -> dialex::Result<std::path::PathBuf> {
        let p = dir.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))?;
        Ok(p)
    };
    let mut out = vec![write(PARALLEL, &corpus.parallel.to_tsv())?];
    let lm = dir.join(LM_TEXT);
    write_monolingual(&lm, &corpus.lm_text)?;
    out.push(lm);
    let prons: String = corpus
        .pronunciations
        .iter()
        .map(|(c, w, p)| format!("{c}\t{w}\t{p}\n"))
        .collect();
    out.push(write(PRONUNCIATIONS, &prons)?);
    out.push(write(CLITICS, &corpus.clitics.to_tsv())?);
    out.push(write(EMBEDDINGS, &corpus.embeddings.to_text())?);
    let mut test = String::new();
    for u in &corpus.test {
        let rel = format!("{POSTERIOR_DIR}/{}.post", u.id);
        out.push(write(&rel, &u.posteriors.to_text())?);
        test.push_str(&format!("{}\t{rel}\t{}\n", u.id, u.reference));
    }
    out.push(write(TEST, &test)?);
    Ok(out)
}

fn io_err(path: &Path, e: std::io::Error) -> dialex::Error {
    dialex::Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
}
