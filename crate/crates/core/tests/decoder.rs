mod support {
    pub mod decoder_oracle;
}

use std::collections::BTreeSet;

use dialex::corpus::tokenize;
use dialex::decoder::{
    build_prefix_tree, decode, expand_output, forced_align, simulate_posteriors, DecoderConfig, PosteriorMatrix,
};
use dialex::ngram::{count_ngrams, estimate_kneser_ney, KneserNeyLm, LmScorer};
use dialex::{Error, LexiconEntry, PhoneSet, Pronunciation, Sentence};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::decoder_oracle::exhaustive_decode;

fn pron(s: &str) -> Pronunciation {
    Pronunciation::parse(s).unwrap()
}

fn entry(word: &str, prons: &[(&str, f64)]) -> LexiconEntry {
    LexiconEntry::from_weighted(word, prons.iter().map(|(p, w)| (pron(p), *w))).unwrap()
}

fn train_lm(text: &[&str], order: usize) -> KneserNeyLm {
    let corpus: Vec<Sentence> = text.iter().map(|t| tokenize(t)).collect();
    estimate_kneser_ney(&count_ngrams(&corpus, order).unwrap(), 0.75).unwrap()
}

struct Instance {
    lex: Vec<LexiconEntry>,
    post: PosteriorMatrix<f64>,
    lm: KneserNeyLm,
    cfg: DecoderConfig,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let phones: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
    loop {
        let min_f = rng.gen_range(1..=2);
        let min_len = if min_f == 1 { 3 } else { 2 };
        let n_words = rng.gen_range(2..=5);
        let lex: Vec<LexiconEntry> = (0..n_words)
            .map(|w| {
                let n_prons = rng.gen_range(1..=2);
                let prons: Vec<(Pronunciation, f64)> = (0..n_prons)
                    .map(|_| {
                        let len = rng.gen_range(min_len..=min_len + 1);
                        let p: Vec<String> = (0..len).map(|_| phones.choose(rng).unwrap().clone()).collect();
                        (Pronunciation::new(p).unwrap(), rng.gen_range(0.2..1.0))
                    })
                    .collect();
                LexiconEntry::from_weighted(&format!("w{w}"), prons).unwrap()
            })
            .collect();
        let utt_len = rng.gen_range(1..=3);
        let utt: Vec<Pronunciation> = (0..utt_len)
            .map(|_| lex.choose(rng).unwrap().prons[0].0.clone())
            .collect();
        let noise = *[0.0, 0.2, 0.5].choose(rng).unwrap();
        let fpp = rng.gen_range(1..=2);
        let set = PhoneSet::new(phones.clone()).unwrap();
        let post: PosteriorMatrix<f64> = simulate_posteriors(&set, &utt, fpp, noise, rng.gen()).unwrap();
        // Keep the exhaustive search small: at most 5 words fit.
        if post.num_frames() > 30 || post.num_frames() / (min_len * min_f) > 5 {
            continue;
        }
        let words: Vec<String> = lex.iter().map(|e| e.word.clone()).collect();
        let text: Vec<String> = (0..30)
            .map(|_| {
                let n = rng.gen_range(1..4);
                (0..n).map(|_| words.choose(rng).unwrap().as_str()).collect::<Vec<_>>().join(" ")
            })
            .collect();
        let refs: Vec<&str> = text.iter().map(String::as_str).collect();
        let lm = train_lm(&refs, rng.gen_range(2..=3));
        let cfg = DecoderConfig {
            lm_weight: *[0.5, 1.0, 2.0].choose(rng).unwrap(),
            word_insertion_penalty: *[0.0, -0.5, 0.3].choose(rng).unwrap(),
            min_frames_per_phone: min_f,
            ..DecoderConfig::exhaustive()
        };
        return Instance { lex, post, lm, cfg };
    }
}

#[test]
fn unpruned_decode_equals_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut compared = 0;
    for case in 0..60 {
        let inst = random_instance(&mut rng);
        let tree = build_prefix_tree(&inst.lex).unwrap();
        let oracle = exhaustive_decode(&inst.post, &inst.lex, &inst.lm, &inst.cfg);
        match decode(&inst.post, &tree, &inst.lm, &inst.cfg, "u") {
            Ok(nb) => {
                assert!(nb.is_well_formed());
                assert_eq!(nb.len(), oracle.len(), "case {case}");
                for (h, o) in nb.hyps.iter().zip(&oracle) {
                    assert_eq!(h.words.tokens(), o.words.as_slice(), "case {case}");
                    assert_eq!(h.acoustic_score, o.acoustic, "case {case}");
                    assert_eq!(h.lm_score, o.lm, "case {case}");
                    assert_eq!(h.total, o.total, "case {case}");
                }
                compared += nb.len();
            }
            Err(Error::EmptyResult(_)) => assert!(oracle.is_empty(), "case {case}"),
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    assert!(compared > 1000, "only {compared} hypotheses compared");
}

#[test]
fn noiseless_single_word_has_zero_acoustic_score() {
    let lex = vec![entry("kopf", &[("g hr ih n t", 1.0)]), entry("bad", &[("b a_ d ih", 1.0)])];
    let tree = build_prefix_tree(&lex).unwrap();
    let lm = train_lm(&["kopf", "bad", "kopf bad"], 2);
    let set = PhoneSet::from_lexicon(&lex);
    let post: PosteriorMatrix<f64> = simulate_posteriors(&set, &[pron("g hr ih n t")], 3, 0.0, 1).unwrap();
    let nb = decode(&post, &tree, &lm, &DecoderConfig::exhaustive(), "u").unwrap();
    let best = nb.best().unwrap();
    assert_eq!(best.words.tokens(), ["kopf"]);
    assert_eq!(best.acoustic_score, 0.0);
}

#[test]
fn clitic_token_survives_decoding() {
    let lex = vec![
        entry("haben#wir", &[("h eh m ax r", 1.0)]),
        entry("gesagt", &[("g s ai t", 1.0)]),
        entry("haben", &[("h a b ax", 1.0)]),
        entry("wir", &[("m ax r", 1.0)]),
    ];
    let tree = build_prefix_tree(&lex).unwrap();
    let lm = train_lm(&["haben#wir gesagt", "haben#wir", "wir haben gesagt"], 3);
    let set = PhoneSet::from_lexicon(&lex);
    let utt = [pron("h eh m ax r"), pron("g s ai t")];
    let post: PosteriorMatrix<f64> = simulate_posteriors(&set, &utt, 3, 0.3, 9).unwrap();
    let nb = decode(&post, &tree, &lm, &DecoderConfig::default(), "u").unwrap();
    let best = nb.best().unwrap();
    assert_eq!(best.words.tokens(), ["haben#wir", "gesagt"]);
    assert_eq!(expand_output(&best.words).tokens(), ["haben", "wir", "gesagt"]);
}

#[test]
fn tree_paths_reproduce_the_lexicon() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let phones = ["a", "b", "c", "d"];
    let lex: Vec<LexiconEntry> = (0..50)
        .map(|w| {
            let n = rng.gen_range(1..=3);
            let prons: Vec<(Pronunciation, f64)> = (0..n)
                .map(|_| {
                    let len = rng.gen_range(1..=4);
                    let p = (0..len).map(|_| phones.choose(&mut rng).unwrap().to_string()).collect();
                    (Pronunciation::new(p).unwrap(), 1.0)
                })
                .collect();
            LexiconEntry::from_weighted(&format!("w{w}"), prons).unwrap()
        })
        .collect();
    let tree = build_prefix_tree(&lex).unwrap();
    let want: BTreeSet<(String, Pronunciation)> = lex
        .iter()
        .flat_map(|e| e.prons.iter().map(move |(p, _)| (e.word.clone(), p.clone())))
        .collect();
    let paths = tree.paths();
    let got: BTreeSet<(String, Pronunciation)> = paths.iter().cloned().collect();
    assert_eq!(paths.len(), got.len(), "a pronunciation appears on two paths");
    assert_eq!(got, want);
    assert_eq!(tree.num_word_ends(), want.len());
}

#[test]
fn tree_shapes() {
    let one = build_prefix_tree(&[entry("kopf", &[("g hr ih", 1.0)])]).unwrap();
    assert_eq!((one.depth(), one.num_word_ends()), (3, 1));
    let homophones = build_prefix_tree(&[entry("meer", &[("m e r", 1.0)]), entry("mehr", &[("m e r", 1.0)])]).unwrap();
    assert_eq!(homophones.num_nodes(), 4);
    assert_eq!(homophones.num_word_ends(), 2);
}

#[test]
fn stored_scores_decompose() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let cfg = DecoderConfig {
            beam_width: 4.0,
            max_active: 50,
            n_best: 20,
            ..inst.cfg
        };
        let tree = build_prefix_tree(&inst.lex).unwrap();
        let Ok(nb) = decode(&inst.post, &tree, &inst.lm, &cfg, "u") else { continue };
        for h in &nb.hyps {
            let fa = forced_align(&inst.post, &tree, h.words.tokens(), cfg.min_frames_per_phone)
                .unwrap()
                .unwrap();
            let lm = LmScorer::score_sentence(&inst.lm, &h.words);
            // Pruning can only lose alignments, never invent better ones.
            assert!(h.acoustic_score <= fa.acoustic + 1e-9);
            assert!((h.lm_score - lm).abs() < 1e-6);
            assert!((h.total - cfg.total(h.acoustic_score, h.lm_score, h.words.len())).abs() < 1e-9);
        }
        // The exhaustive search keeps the best alignment of every sequence.
        let full = decode(&inst.post, &tree, &inst.lm, &inst.cfg, "u").unwrap();
        for h in &full.hyps {
            let fa = forced_align(&inst.post, &tree, h.words.tokens(), cfg.min_frames_per_phone)
                .unwrap()
                .unwrap();
            assert!((h.acoustic_score - fa.acoustic).abs() < 1e-6);
        }
    }
}

#[test]
fn unpruned_search_keeps_narrow_winner() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..30 {
        let inst = random_instance(&mut rng);
        let tree = build_prefix_tree(&inst.lex).unwrap();
        let narrow = DecoderConfig {
            beam_width: 2.0,
            max_active: 8,
            ..inst.cfg
        };
        let Ok(nb) = decode(&inst.post, &tree, &inst.lm, &narrow, "u") else { continue };
        let top = nb.best().unwrap();
        let wide = decode(&inst.post, &tree, &inst.lm, &inst.cfg, "u").unwrap();
        let same = wide.hyps.iter().find(|h| h.words == top.words).expect("rank-1 kept");
        assert!(same.total >= top.total);
        assert!(wide.best().unwrap().total >= top.total);
    }
}

#[test]
fn noiseless_in_lexicon_sentences_are_recovered() {
    let lex = vec![
        entry("kopf", &[("g hr ih n t", 1.0)]),
        entry("kneipe", &[("b ai ts", 1.0)]),
        entry("haben#wir", &[("h eh m ax r", 1.0)]),
        entry("gesagt", &[("g s ai t", 1.0)]),
        entry("schwimm+", &[("sh v ih m", 1.0)]),
        entry("bad", &[("b a_ d ih", 1.0)]),
    ];
    let tree = build_prefix_tree(&lex).unwrap();
    let lm = train_lm(&["haben#wir gesagt", "kopf", "schwimm+ bad kneipe", "kneipe kopf"], 2);
    let set = PhoneSet::from_lexicon(&lex);
    let sentences = [
        (vec!["haben#wir", "gesagt"], "haben wir gesagt"),
        (vec!["schwimm+", "bad"], "schwimmbad"),
        (vec!["kopf", "kneipe", "kopf"], "kopf kneipe kopf"),
    ];
    for (i, (words, reference)) in sentences.iter().enumerate() {
        let prons: Vec<Pronunciation> = words
            .iter()
            .map(|w| tree.pronunciations(w).unwrap()[0].0.clone())
            .collect();
        let post: PosteriorMatrix<f64> = simulate_posteriors(&set, &prons, 3, 0.0, i as u64).unwrap();
        let nb = decode(&post, &tree, &lm, &DecoderConfig::default(), "u").unwrap();
        assert_eq!(expand_output(&nb.best().unwrap().words), tokenize(reference));
    }
}

#[test]
fn phone_set_mismatch_is_reported() {
    let lex = vec![entry("kopf", &[("g hr ih n t", 1.0)])];
    let tree = build_prefix_tree(&lex).unwrap();
    let lm = train_lm(&["kopf"], 2);
    let other = PhoneSet::new(["a", "b"].map(String::from)).unwrap();
    let post: PosteriorMatrix<f64> = simulate_posteriors(&other, &[pron("a b")], 2, 0.1, 1).unwrap();
    assert!(matches!(
        decode(&post, &tree, &lm, &DecoderConfig::default(), "u"),
        Err(Error::PhoneSetMismatch(_))
    ));
}

#[test]
fn overpruning_is_an_explicit_error() {
    let lex = vec![entry("kopf", &[("g hr ih n t", 1.0)])];
    let tree = build_prefix_tree(&lex).unwrap();
    let lm = train_lm(&["kopf"], 2);
    let set = PhoneSet::from_lexicon(&lex);
    // Two frames cannot hold five phones.
    let post: PosteriorMatrix<f64> = PosteriorMatrix::new(set.clone(), vec![vec![0.2; 5]; 2]).unwrap();
    assert!(matches!(
        decode(&post, &tree, &lm, &DecoderConfig::default(), "u"),
        Err(Error::EmptyResult(_))
    ));
}
