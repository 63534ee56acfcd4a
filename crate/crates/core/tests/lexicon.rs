use std::collections::{BTreeMap, HashMap};

use dialex::g2p::G2pTrainConfig;
use dialex::lexicon::{
    add_clitic_entries, assemble_lexicon, cosine_distance, filter_by_embedding_vicinity, filter_by_frequency,
    prune_lexicon, CliticEntry, UsageCounts,
};
use dialex::{CliticInventory, GraphoneModel, LexiconEntry, MappingCandidate, PhoneSet, Pronunciation};
use dialex::EmbeddingTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pron(s: &str) -> Pronunciation {
    Pronunciation::parse(s).unwrap()
}

fn random_candidates(rng: &mut ChaCha8Rng, n: usize, dialect: usize, standard: usize) -> Vec<MappingCandidate> {
    (0..n)
        .map(|_| {
            MappingCandidate::new(
                &format!("d{}", rng.gen_range(0..dialect)),
                &format!("s{}", rng.gen_range(0..standard)),
                rng.gen_range(0.0..=1.0),
                rng.gen_range(1..20),
            )
        })
        .collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[test]
fn frequency_filter_equals_predicate_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cands = random_candidates(&mut rng, 500, 40, 30);
    for (min_count, min_prob) in [(1, 0.0), (3, 0.2), (10, 0.5), (19, 0.99)] {
        let got = filter_by_frequency(&cands, min_count, min_prob).unwrap();
        let mut want = Vec::new();
        for c in &cands {
            if c.cooccurrence_count >= min_count && c.probability >= min_prob {
                want.push(c.clone());
            }
        }
        assert_eq!(got, want);
    }
}

#[test]
fn vicinity_filter_equals_cosine_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        // One group of 20 distinct dialect variants for the same standard word.
        let cands: Vec<MappingCandidate> = (0..20)
            .map(|i| MappingCandidate::new(&format!("v{i}"), "std", rng.gen_range(0.0..1.0), rng.gen_range(1..50)))
            .collect();
        let mut emb = EmbeddingTable::new(6).unwrap();
        let mut vecs = HashMap::new();
        for c in &cands {
            let v = unit_vector(&mut rng, 6);
            emb.insert(&c.dialect_word, v.clone()).unwrap();
            vecs.insert(c.dialect_word.clone(), v);
        }
        let max_dist = rng.gen_range(0.0..2.0);
        let center = cands
            .iter()
            .max_by(|a, b| {
                a.cooccurrence_count
                    .cmp(&b.cooccurrence_count)
                    .then(a.probability.total_cmp(&b.probability))
            })
            .unwrap();
        let want: Vec<MappingCandidate> = cands
            .iter()
            .filter(|c| {
                let (a, b) = (&vecs[&c.dialect_word], &vecs[&center.dialect_word]);
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                c.dialect_word == center.dialect_word || 1.0 - dot <= max_dist
            })
            .cloned()
            .collect();
        assert_eq!(filter_by_embedding_vicinity(&cands, &emb, max_dist).unwrap(), want);
        assert_eq!(filter_by_embedding_vicinity(&cands, &emb, 2.0).unwrap(), cands);
    }
}

#[test]
fn cosine_distance_of_unit_vectors() {
    assert!((cosine_distance::<f64>(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    assert!(cosine_distance::<f64>(&[0.6, 0.8], &[0.6, 0.8]).abs() < 1e-15);
}

fn g2p(rows: &[(&str, &str)]) -> GraphoneModel {
    let pairs: Vec<(String, Pronunciation)> = rows.iter().map(|(w, p)| (w.to_string(), pron(p))).collect();
    GraphoneModel::train(&pairs, G2pTrainConfig::default()).unwrap().0
}

const SEED_LEXICON: &[(&str, &str)] = &[
    ("grind", "g hr ih n t"),
    ("beiz", "b ai ts"),
    ("chind", "x ih n t"),
    ("huus", "h uu s"),
    ("hemmer", "h eh m ax r"),
    ("gseit", "g s ai t"),
    ("bued", "b u ax t"),
    ("meitli", "m ai t l i"),
    ("ned", "n eh t"),
    ("gsi", "g s i"),
    ("mer", "m ax r"),
    ("zmorge", "ts m o r g ax"),
];

#[test]
fn kopf_gets_the_grind_pronunciation() {
    let model = g2p(SEED_LEXICON);
    let (lex, skipped) = assemble_lexicon(&[MappingCandidate::new("grind", "kopf", 1.0, 3)], &model, 16).unwrap();
    assert!(skipped.is_empty());
    assert_eq!(lex.len(), 1);
    assert_eq!(lex[0].word, "kopf");
    assert_eq!(lex[0].prons, vec![(pron("g hr ih n t"), 1.0)]);
}

#[test]
fn assembled_entries_equal_direct_transduction() {
    let model = g2p(SEED_LEXICON);
    let maps = [
        ("grind", "kopf", 0.9),
        ("beiz", "kneipe", 0.8),
        ("chind", "kinder", 1.0),
        ("huus", "haus", 0.7),
        ("gseit", "gesagt", 0.6),
        ("bued", "junge", 0.5),
        ("meitli", "mädchen", 0.95),
        ("ned", "nicht", 0.99),
        ("gsi", "gewesen", 0.4),
        ("zmorge", "frühstück", 0.3),
        // A second variant of an already mapped word, and an untranscribable one.
        ("huus", "kopf", 0.3),
        ("qqq", "nichts", 0.9),
    ];
    let cands: Vec<MappingCandidate> = maps.iter().map(|(d, s, p)| MappingCandidate::new(d, s, *p, 2)).collect();
    let (lex, skipped) = assemble_lexicon(&cands, &model, 16).unwrap();
    assert_eq!(skipped.len(), 1, "{skipped:?}");
    assert_eq!(skipped[0].dialect_word, "qqq");
    let phones = PhoneSet::from_lexicon(&lex);
    assert!(model.phone_set().is_superset_of(&phones));
    for e in &lex {
        let max = e.prons.iter().map(|(_, w)| *w).fold(0.0, f64::max);
        assert_eq!(max, 1.0, "{}", e.word);
        for (p, _) in &e.prons {
            let from: Vec<&str> = maps
                .iter()
                .filter(|(d, s, _)| *s == e.word && model.transduce(d, 16).ok().as_ref() == Some(p))
                .map(|(d, _, _)| *d)
                .collect();
            assert!(!from.is_empty(), "{}: {:?} not from any mapping", e.word, p);
        }
    }
    let kopf = lex.iter().find(|e| e.word == "kopf").unwrap();
    let grind = model.transduce("grind", 16).unwrap();
    let huus = model.transduce("huus", 16).unwrap();
    assert_eq!(kopf.prons.len(), 2);
    let w: BTreeMap<&Pronunciation, f64> = kopf.prons.iter().map(|(p, w)| (p, *w)).collect();
    assert_eq!(w[&grind], 1.0);
    assert!((w[&huus] - 0.3 / 0.9).abs() < 1e-12);
}

#[test]
fn identical_pronunciations_merge() {
    let model = g2p(SEED_LEXICON);
    let cands = [MappingCandidate::new("grind", "kopf", 0.4, 1), MappingCandidate::new("grind", "kopf", 0.3, 1)];
    let (lex, _) = assemble_lexicon(&cands, &model, 16).unwrap();
    assert_eq!(lex[0].prons.len(), 1);
    assert_eq!(lex[0].prons[0].1, 1.0);
}

#[test]
fn clitic_entries_count_bookkeeping() {
    let model = g2p(SEED_LEXICON);
    let base = vec![LexiconEntry::from_weighted("kopf", [(pron("g hr ih n t"), 1.0)]).unwrap()];
    let hemmer = CliticInventory::new(vec![CliticEntry::new("hemmer", &["haben", "wir"]).unwrap()]);
    let (lex, _) = add_clitic_entries(&base, &hemmer, &model, 16).unwrap();
    let e = lex.iter().find(|e| e.word == "haben#wir").unwrap();
    assert_eq!(e.prons[0].0, model.transduce("hemmer", 16).unwrap());
    assert_eq!(add_clitic_entries(&base, &CliticInventory::default(), &model, 16).unwrap().0, base);

    // 50 synthetic clitics, some with letters the model cannot spell.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let letters = ['g', 'r', 'i', 'n', 'd', 'h', 'e', 'm', 's', 't', 'q'];
    let entries: Vec<CliticEntry> = (0..50)
        .map(|i| {
            let len = rng.gen_range(2..6);
            let surface: String = (0..len).map(|_| letters[rng.gen_range(0..letters.len())]).collect();
            CliticEntry::new(&surface, &[&format!("a{i}"), &format!("b{i}")]).unwrap()
        })
        .collect();
    let ok = entries.iter().filter(|c| model.transduce(&c.dialect_surface, 16).is_ok()).count();
    assert!(ok > 0 && ok < 50, "{ok}");
    let inv = CliticInventory::new(entries);
    let (lex, skipped) = add_clitic_entries(&base, &inv, &model, 16).unwrap();
    assert_eq!(lex.len(), base.len() + ok);
    assert_eq!(skipped.len(), 50 - ok);
    for c in &inv.entries {
        let n = lex.iter().filter(|e| e.word == c.merged_token).count();
        assert_eq!(n, usize::from(model.transduce(&c.dialect_surface, 16).is_ok()));
    }
}

#[test]
fn prune_equals_per_word_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pool: Vec<Pronunciation> = ["a", "a b", "b", "b c", "c a", "a a"].iter().map(|s| pron(s)).collect();
    for _ in 0..200 {
        let mut lex = Vec::new();
        let mut usage = UsageCounts::new();
        for w in 0..5 {
            let k = rng.gen_range(1..=pool.len());
            let prons: Vec<(Pronunciation, f64)> = pool[..k].iter().map(|p| (p.clone(), rng.gen_range(0.1..1.0))).collect();
            for (p, _) in &prons {
                if rng.gen_bool(0.8) {
                    usage.insert((format!("w{w}"), p.clone()), rng.gen_range(0..20));
                }
            }
            lex.push(LexiconEntry::from_weighted(&format!("w{w}"), prons).unwrap());
        }
        let rel = rng.gen_range(0.0..=1.0);
        let pruned = prune_lexicon(&lex, &usage, rel).unwrap();
        assert_eq!(pruned.len(), lex.len());
        for (before, after) in lex.iter().zip(&pruned) {
            let count = |p: &Pronunciation| *usage.get(&(before.word.clone(), p.clone())).unwrap_or(&0);
            let max = before.prons.iter().map(|(p, _)| count(p)).max().unwrap();
            let mut want: Vec<&Pronunciation> =
                before.prons.iter().map(|(p, _)| p).filter(|p| count(p) as f64 >= rel * max as f64).collect();
            want.sort();
            let mut got: Vec<&Pronunciation> = after.prons.iter().map(|(p, _)| p).collect();
            got.sort();
            assert_eq!(got, want);
            assert!(!after.prons.is_empty());
        }
    }
}

proptest! {
    // Count-only frequency filtering never removes a group center, so the two
    // filters commute.
    #[test]
    fn filters_commute_and_contract(seed in 0u64..500, min_count in 1u64..10, max_dist in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cands = random_candidates(&mut rng, 60, 15, 6);
        // Distinct (dialect, standard) pairs, as extract_mappings produces.
        let mut seen = std::collections::HashSet::new();
        cands.retain(|c| seen.insert((c.dialect_word.clone(), c.standard_word.clone())));
        let mut emb = EmbeddingTable::new(3).unwrap();
        for d in 0..13 {
            emb.insert(&format!("d{d}"), unit_vector(&mut rng, 3)).unwrap();
        }
        let fv = filter_by_embedding_vicinity(&filter_by_frequency(&cands, min_count, 0.0).unwrap(), &emb, max_dist).unwrap();
        let vf = filter_by_frequency(&filter_by_embedding_vicinity(&cands, &emb, max_dist).unwrap(), min_count, 0.0).unwrap();
        prop_assert!(fv.iter().all(|c| cands.contains(c)));
        let key = |v: &[MappingCandidate]| {
            let mut k: Vec<(String, String)> = v.iter().map(|c| (c.dialect_word.clone(), c.standard_word.clone())).collect();
            k.sort();
            k
        };
        prop_assert_eq!(key(&fv), key(&vf));
    }
}
