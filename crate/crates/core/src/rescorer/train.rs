use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::LstmLm;
use crate::corpus::Sentence;
use crate::scalar::Scalar;
use crate::{Error, Result};

/// Plain SGD settings; one update per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Maximum global L2 norm of a sentence gradient.
    pub gradient_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 10,
            seed: 1,
            gradient_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.gradient_clip > 0.0) {
            return Err(Error::InvalidArgument("gradient_clip must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    /// Training-set perplexity after each epoch.
    pub epoch_perplexity: Vec<f64>,
}

/// Per-token perplexity of `corpus` (end-of-sentence tokens included).
pub fn corpus_perplexity<T: Scalar>(model: &LstmLm<T>, corpus: &[Sentence]) -> f64 {
    let (mut loss, mut n) = (0.0, 0usize);
    for s in corpus.iter().filter(|s| !s.is_empty()) {
        loss += model.loss(s).as_f64();
        n += s.len() + 1;
    }
    if n == 0 {
        1.0
    } else {
        (loss / n as f64).exp()
    }
}

/// Trains a fresh model on `corpus` with full-sentence BPTT. The vocabulary is
/// every word of the corpus. Sentence order is reshuffled each epoch from the
/// seed; empty sentences are skipped.
pub fn train_lstm<T: Scalar>(
    corpus: &[Sentence],
    embed_dim: usize,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<(LstmLm<T>, TrainingLog)> {
    cfg.validate()?;
    let data: Vec<&Sentence> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if data.is_empty() {
        return Err(Error::InvalidArgument("training corpus is empty".into()));
    }
    let words = data.iter().flat_map(|s| s.iter().cloned());
    let mut model = LstmLm::<T>::new(words, embed_dim, hidden_dim, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let clip = T::from_f64_lossy(cfg.gradient_clip);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog {
        epoch_perplexity: Vec::with_capacity(cfg.epochs),
    };
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, mut grad) = model.loss_and_gradient(data[i]);
            let norm = grad.squared_norm().sqrt();
            let scale = if norm > clip { clip / norm } else { T::one() };
            let step = lr * scale;
            for (p, g) in model.params_mut().blocks_mut().into_iter().zip(grad.blocks_mut()) {
                for (x, d) in p.iter_mut().zip(g.iter()) {
                    *x -= step * *d;
                }
            }
        }
        log.epoch_perplexity.push(corpus_perplexity(&model, corpus));
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn learns_deterministic_bigram() {
        let corpus = vec![tokenize("a b"); 3];
        let cfg = TrainConfig {
            epochs: 60,
            ..Default::default()
        };
        let (m, _) = train_lstm::<f64>(&corpus, 8, 8, &cfg).unwrap();
        let p_b = 10f64.powf(m.step_log10_probs(&tokenize("a b"))[1]);
        assert!(p_b > 0.9, "{p_b}");
    }

    #[test]
    fn same_seed_same_parameters() {
        let corpus = vec![tokenize("a b c"), tokenize("b c a"), tokenize("c")];
        let cfg = TrainConfig {
            epochs: 3,
            ..Default::default()
        };
        let (m1, l1) = train_lstm::<f64>(&corpus, 4, 6, &cfg).unwrap();
        let (m2, l2) = train_lstm::<f64>(&corpus, 4, 6, &cfg).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn rejects_bad_config() {
        let corpus = vec![tokenize("a")];
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_lstm::<f64>(&corpus, 2, 2, &bad).is_err());
        assert!(train_lstm::<f64>(&[], 2, 2, &TrainConfig::default()).is_err());
    }
}
