use std::collections::BTreeSet;

use dialex::corpus::tokenize;
use dialex::decoder::{Hypothesis, NBestList};
use dialex::rescorer::{
    corpus_perplexity, gradient_check, gradient_check_with, nll, rescore_nbest, rescored_to_jsonl, train_lstm,
    tune_weights, GradientFault, LstmLm, ScoreWeights, TrainConfig,
};
use dialex::Sentence;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn s(text: &str) -> Sentence {
    tokenize(text)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward pass written out step by step from the documented parameter layout,
/// returning the natural-log probability of each next token.
fn traced_log_probs(m: &LstmLm<f64>, sentence: &Sentence) -> Vec<f64> {
    let (e, h, v) = (m.embed_dim(), m.hidden_dim(), m.vocab_size());
    let p = m.params();
    let id = |w: &str| m.vocab().iter().position(|x| x == w).unwrap_or(2);
    let mut inputs = vec![0];
    inputs.extend(sentence.iter().map(|w| id(w)));
    let mut targets: Vec<usize> = inputs[1..].to_vec();
    targets.push(1);
    let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
    let mut out = Vec::new();
    for (&x, &t) in inputs.iter().zip(&targets) {
        let mut input = p.emb[x * e..(x + 1) * e].to_vec();
        input.extend(&hs);
        let pre: Vec<f64> = (0..4 * h)
            .map(|r| p.b[r] + (0..e + h).map(|k| p.w[r * (e + h) + k] * input[k]).sum::<f64>())
            .collect();
        for k in 0..h {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[h + k]);
            let o = sigmoid(pre[2 * h + k]);
            let g = pre[3 * h + k].tanh();
            cs[k] = f * cs[k] + i * g;
            hs[k] = o * cs[k].tanh();
        }
        let logits: Vec<f64> = (0..v)
            .map(|j| p.proj_b[j] + (0..h).map(|k| hs[k] * p.proj[k * v + j]).sum::<f64>())
            .collect();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        out.push(logits[t] - z.ln());
    }
    out
}

#[test]
fn forward_matches_hand_trace() {
    let m = LstmLm::<f64>::with_init_range(["a", "b", "c"], 3, 4, 5, 0.5).unwrap();
    for text in ["a b", "c", "b zzz a a"] {
        let sent = s(text);
        let trace = traced_log_probs(&m, &sent);
        let steps = m.step_log10_probs(&sent);
        assert_eq!(steps.len(), sent.len() + 1);
        for (a, b) in steps.iter().zip(&trace) {
            assert!((a - b / std::f64::consts::LN_10).abs() < 1e-12);
        }
        let hand: f64 = trace.iter().sum::<f64>() / std::f64::consts::LN_10;
        assert!((nll(&m, &sent) - hand).abs() < 1e-12);
        // Pure: scoring twice gives the same bits.
        assert_eq!(nll(&m, &sent), nll(&m, &sent));
    }
}

#[test]
fn zeroed_projection_is_uniform() {
    let mut m = LstmLm::<f64>::new(["haben", "wir", "gesagt"], 4, 6, 1).unwrap();
    m.params_mut().proj.iter_mut().for_each(|x| *x = 0.0);
    m.params_mut().proj_b.iter_mut().for_each(|x| *x = 0.0);
    let v = m.vocab_size() as f64;
    for text in ["haben", "wir haben gesagt", "unbekannt wir"] {
        let sent = s(text);
        let want = -((sent.len() + 1) as f64) * v.log10();
        assert!((nll(&m, &sent) - want).abs() < 1e-12);
        for d in m.step_distributions(&sent) {
            assert!(d.iter().all(|p| (p - 1.0 / v).abs() < 1e-15));
        }
    }
}

/// Subject-verb agreement plus a fixed sentence end: learnable, not trivial.
fn agreement_corpus(n: usize, seed: u64) -> Vec<Sentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = [("wir", "haben"), ("ich", "habe"), ("er", "hat"), ("sie", "haben")];
    let objects = ["das", "es", "nichts"];
    (0..n)
        .map(|_| {
            let (subj, verb) = pairs.choose(&mut rng).unwrap();
            let obj = objects.choose(&mut rng).unwrap();
            s(&format!("{subj} {verb} {obj} gesagt"))
        })
        .collect()
}

#[test]
fn perplexity_does_not_rise_over_first_epochs() {
    let corpus = agreement_corpus(50, 3);
    let cfg = TrainConfig {
        learning_rate: 0.2,
        epochs: 5,
        ..Default::default()
    };
    let (m, log) = train_lstm::<f64>(&corpus, 8, 12, &cfg).unwrap();
    assert_eq!(log.epoch_perplexity.len(), 5);
    assert!(log.epoch_perplexity.windows(2).all(|w| w[1] <= w[0]), "{:?}", log.epoch_perplexity);
    assert_eq!(*log.epoch_perplexity.last().unwrap(), corpus_perplexity(&m, &corpus));
    for d in m.step_distributions(&corpus[0]) {
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    assert!(m.params().is_finite());
}

#[test]
fn learns_deterministic_bigram() {
    let corpus = vec![s("a b"); 3];
    let cfg = TrainConfig {
        epochs: 60,
        ..Default::default()
    };
    let (m, _) = train_lstm::<f64>(&corpus, 8, 8, &cfg).unwrap();
    let p_b = 10f64.powf(m.step_log10_probs(&s("a b"))[1]);
    assert!(p_b > 0.9, "{p_b}");
    let (again, _) = train_lstm::<f64>(&corpus, 8, 8, &cfg).unwrap();
    assert_eq!(m, again);
}

#[test]
fn trained_model_file_round_trips() {
    let (m, _) = train_lstm::<f64>(&agreement_corpus(20, 4), 4, 6, &TrainConfig { epochs: 2, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lstm.txt");
    m.save(&path).unwrap();
    let back = LstmLm::<f64>::load(&path).unwrap();
    assert_eq!(back, m);
    let sent = s("wir haben es gesagt");
    assert_eq!(nll(&back, &sent), nll(&m, &sent));
}

#[test]
fn gradient_check_on_downsized_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    // Seven words plus the three special symbols: V = 10.
    let words = ["a", "b", "c", "d", "e", "f", "g"];
    for seed in 0..5 {
        let m = LstmLm::<f64>::with_init_range(words, 4, 5, seed, 0.5).unwrap();
        assert_eq!(m.vocab_size(), 10);
        let len = rng.gen_range(1..7);
        let sent = Sentence::new((0..len).map(|_| words.choose(&mut rng).unwrap().to_string()).collect()).unwrap();
        let err = gradient_check(&m, &sent);
        assert!(err < 1e-4, "seed {seed}: {err}");
        let bad = gradient_check_with(&m, &sent, GradientFault::ForgetGate);
        if len > 1 {
            // The forget gate only matters once there is a previous cell state.
            assert!(bad > 1e-2, "seed {seed}: {bad}");
        }
    }
    let m = LstmLm::<f64>::with_init_range(words, 4, 5, 9, 0.5).unwrap();
    assert_eq!(gradient_check(&m, &Sentence::default()), 0.0);
}

fn hyp(words: &str, ac: f64, lm: f64) -> Hypothesis {
    Hypothesis {
        words: s(words),
        acoustic_score: ac,
        lm_score: lm,
        total: ac + lm,
    }
}

fn uniform_model() -> LstmLm<f64> {
    let mut m = LstmLm::<f64>::new(["haben", "wir", "gesagt"], 4, 4, 2).unwrap();
    m.params_mut().proj.iter_mut().for_each(|x| *x = 0.0);
    m.params_mut().proj_b.iter_mut().for_each(|x| *x = 0.0);
    m
}

#[test]
fn three_hypotheses_hand_combination() {
    // V = 6, so a sentence of n expanded words scores -(n + 1) * log10(6).
    let list = NBestList::from_unsorted(
        "u",
        vec![hyp("haben#wir gesagt", -10.0, -3.0), hyp("gesagt", -11.0, -2.0), hyp("wir gesagt", -10.5, -2.5)],
        10,
    );
    let out = rescore_nbest(&list, &uniform_model(), &ScoreWeights::default()).unwrap();
    let l6 = 0.778_151_250_383_643_6;
    // -10 - 1.5 - 0.5*4*l6, -11 - 1 - 0.5*2*l6, -10.5 - 1.25 - 0.5*3*l6
    let want = [("gesagt", -12.778_151_25), ("wir gesagt", -12.917_226_876), ("haben#wir gesagt", -13.056_302_501)];
    for (r, (words, total)) in out.hyps.iter().zip(want) {
        assert_eq!(r.hyp.words, s(words));
        assert!((r.rescored_total - total).abs() < 1e-8, "{words}: {}", r.rescored_total);
    }
    assert!((out.hyps[2].neural + 4.0 * l6).abs() < 1e-12);
    let jsonl = rescored_to_jsonl(&[out]).unwrap();
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["rank"], 1);
    assert!(first["neural"].is_f64() && first["rescored_total"].is_f64());
}

fn random_list(rng: &mut ChaCha8Rng) -> NBestList {
    let words = ["haben", "wir", "gesagt", "haben#wir", "schwimm+", "bad"];
    let mut seen = BTreeSet::new();
    let mut hyps = Vec::new();
    for _ in 0..rng.gen_range(1..15) {
        let len = rng.gen_range(1..5);
        let w: Vec<&str> = (0..len).map(|_| *words.choose(rng).unwrap()).collect();
        let text = w.join(" ");
        if seen.insert(text.clone()) {
            // Coarse scores so that ties happen.
            hyps.push(hyp(&text, -(rng.gen_range(0..8) as f64), -(rng.gen_range(0..4) as f64)));
        }
    }
    NBestList::from_unsorted("u", hyps, 100)
}

proptest! {
    #[test]
    fn rescoring_permutes_and_gamma_zero_keeps_order(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0, gamma in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let list = random_list(&mut rng);
        let (model, _) = train_lstm::<f64>(&[s("haben wir gesagt"), s("schwimmbad")], 3, 3, &TrainConfig { epochs: 1, ..Default::default() }).unwrap();

        let out = rescore_nbest(&list, &model, &ScoreWeights { alpha, beta, gamma }).unwrap();
        let before: BTreeSet<&Sentence> = list.hyps.iter().map(|h| &h.words).collect();
        let after: BTreeSet<&Sentence> = out.hyps.iter().map(|r| &r.hyp.words).collect();
        prop_assert_eq!(out.hyps.len(), list.len());
        prop_assert_eq!(before, after);
        prop_assert!(out.hyps.windows(2).all(|w| w[0].rescored_total > w[1].rescored_total
            || (w[0].rescored_total == w[1].rescored_total && w[0].original_rank < w[1].original_rank)));

        // First pass ranks by ac + lm, so equal weights and no neural term reproduce it.
        let first_pass = rescore_nbest(&list, &model, &ScoreWeights { alpha: 1.0, beta: 1.0, gamma: 0.0 }).unwrap();
        prop_assert_eq!(first_pass.to_nbest(), list.clone());

        // Pure neural order.
        let neural = rescore_nbest(&list, &model, &ScoreWeights { alpha: 0.0, beta: 0.0, gamma: 1.0 }).unwrap();
        prop_assert!(neural.hyps.windows(2).all(|w| w[0].neural >= w[1].neural));
    }
}

#[test]
fn tuning_prefers_weights_that_fix_errors() {
    // The acoustically best hypothesis is wrong; only the neural LM knows better.
    let corpus = vec![s("wir haben gesagt"); 5];
    let (model, _) = train_lstm::<f64>(&corpus, 6, 6, &TrainConfig { epochs: 30, ..Default::default() }).unwrap();
    let list = NBestList::from_unsorted("u", vec![hyp("wir gesagt haben", -5.0, -2.0), hyp("wir haben gesagt", -5.5, -2.0)], 10);
    let rescored = rescore_nbest(&list, &model, &ScoreWeights::default()).unwrap();
    let grid = [
        ScoreWeights { alpha: 1.0, beta: 1.0, gamma: 0.0 },
        ScoreWeights { alpha: 1.0, beta: 1.0, gamma: 1.0 },
    ];
    let (w, score) = tune_weights(&[rescored], &[s("wir haben gesagt")], &grid).unwrap();
    assert_eq!(w, grid[1]);
    assert_eq!(score, 0.0);
}
