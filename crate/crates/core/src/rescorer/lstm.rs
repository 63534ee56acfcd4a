use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::ngram::{SENTENCE_END, SENTENCE_START, UNKNOWN};
use crate::scalar::Scalar;
use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

const MODEL_MAGIC: &str = "lstm-lm v1";
const INIT_RANGE: f64 = 0.1;

/// Parameter blocks, row-major.
///
/// * `emb`: V x E, row per vocabulary entry
/// * `w`: 4H x (E + H), gate rows in the order input, forget, output, candidate;
///   the first E columns multiply the embedding, the last H the previous hidden state
/// * `b`: 4H, same gate order
/// * `proj`: H x V output projection
/// * `proj_b`: V output bias
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T: Scalar> {
    pub emb: Vec<T>,
    pub w: Vec<T>,
    pub b: Vec<T>,
    pub proj: Vec<T>,
    pub proj_b: Vec<T>,
}

impl<T: Scalar> Params<T> {
    fn zeros(v: usize, e: usize, h: usize) -> Self {
        Params {
            emb: vec![T::zero(); v * e],
            w: vec![T::zero(); 4 * h * (e + h)],
            b: vec![T::zero(); 4 * h],
            proj: vec![T::zero(); h * v],
            proj_b: vec![T::zero(); v],
        }
    }

    pub fn blocks(&self) -> [&[T]; 5] {
        [&self.emb, &self.w, &self.b, &self.proj, &self.proj_b]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<T>; 5] {
        [&mut self.emb, &mut self.w, &mut self.b, &mut self.proj, &mut self.proj_b]
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn squared_norm(&self) -> T {
        self.blocks().iter().flat_map(|b| b.iter()).map(|x| *x * *x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}

/// Deliberate gradient bugs, for checking that the gradient check catches them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientFault {
    None,
    /// Uses the new cell state where the forget gate needs the previous one.
    ForgetGate,
}

struct Step<T> {
    x: usize,
    target: usize,
    h_prev: Vec<T>,
    c_prev: Vec<T>,
    /// Activated gates: input, forget, output, candidate (each H).
    gates: Vec<T>,
    c: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
    /// Natural log probability of the target, from the log-softmax.
    log_prob: T,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Single-layer LSTM language model over whole-word tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLm<T: Scalar> {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    embed_dim: usize,
    hidden_dim: usize,
    params: Params<T>,
}

impl<T: Scalar> LstmLm<T> {
    /// Vocabulary = `<s>`, `</s>`, `<unk>`, then the given words sorted and
    /// deduplicated. Parameters are uniform in [-0.1, 0.1] from `seed`.
    pub fn new<I, S>(words: I, embed_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_init_range(words, embed_dim, hidden_dim, seed, INIT_RANGE)
    }

    /// Like [`new`](Self::new) with parameters uniform in `[-range, range]`.
    pub fn with_init_range<I, S>(words: I, embed_dim: usize, hidden_dim: usize, seed: u64, range: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidArgument("init range must be positive".into()));
        }
        if embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument("embedding and hidden sizes must be at least 1".into()));
        }
        let mut rest: Vec<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w| w != SENTENCE_START && w != SENTENCE_END && w != UNKNOWN)
            .collect();
        rest.sort();
        rest.dedup();
        let mut vocab = vec![SENTENCE_START.to_string(), SENTENCE_END.to_string(), UNKNOWN.to_string()];
        vocab.extend(rest);
        let mut model = Self::with_params(
            vocab,
            embed_dim,
            hidden_dim,
            Params::zeros(0, 0, 0),
        );
        model.params = Params::zeros(model.vocab.len(), embed_dim, hidden_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in model.params.blocks_mut() {
            for x in block.iter_mut() {
                *x = T::from_f64_lossy(rng.gen_range(-range..=range));
            }
        }
        Ok(model)
    }

    fn with_params(vocab: Vec<String>, embed_dim: usize, hidden_dim: usize, params: Params<T>) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        LstmLm {
            vocab,
            index,
            embed_dim,
            hidden_dim,
            params,
        }
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<T> {
        &mut self.params
    }

    fn id(&self, w: &str) -> usize {
        self.index.get(w).copied().unwrap_or(2)
    }

    /// Converts every parameter to another float width.
    pub fn cast<U: Scalar>(&self) -> LstmLm<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::from_f64_lossy(x.as_f64())).collect();
        LstmLm::with_params(
            self.vocab.clone(),
            self.embed_dim,
            self.hidden_dim,
            Params {
                emb: conv(&self.params.emb),
                w: conv(&self.params.w),
                b: conv(&self.params.b),
                proj: conv(&self.params.proj),
                proj_b: conv(&self.params.proj_b),
            },
        )
    }

    // (input, target) pairs: <s> w1 .. wn predicting w1 .. wn </s>. An empty
    // sentence has no steps.
    fn steps_of(&self, sentence: &Sentence) -> Vec<(usize, usize)> {
        if sentence.is_empty() {
            return Vec::new();
        }
        let ids: Vec<usize> = sentence.iter().map(|w| self.id(w)).collect();
        let mut inputs = vec![0];
        inputs.extend(&ids);
        let mut targets = ids;
        targets.push(1);
        inputs.into_iter().zip(targets).collect()
    }

    fn forward(&self, sentence: &Sentence) -> Vec<Step<T>> {
        let (e, h, v) = (self.embed_dim, self.hidden_dim, self.vocab.len());
        let p = &self.params;
        let mut h_prev = vec![T::zero(); h];
        let mut c_prev = vec![T::zero(); h];
        let mut out = Vec::new();
        for (x, target) in self.steps_of(sentence) {
            let emb = &p.emb[x * e..(x + 1) * e];
            let mut gates = vec![T::zero(); 4 * h];
            for (r, g) in gates.iter_mut().enumerate() {
                let row = &p.w[r * (e + h)..(r + 1) * (e + h)];
                let mut z = p.b[r];
                for k in 0..e {
                    z += row[k] * emb[k];
                }
                for k in 0..h {
                    z += row[e + k] * h_prev[k];
                }
                *g = if r < 3 * h { sigmoid(z) } else { z.tanh() };
            }
            let mut c = vec![T::zero(); h];
            let mut hn = vec![T::zero(); h];
            for k in 0..h {
                let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                c[k] = f * c_prev[k] + i * g;
                hn[k] = o * c[k].tanh();
            }
            let mut logits = p.proj_b.clone();
            for k in 0..h {
                let row = &p.proj[k * v..(k + 1) * v];
                for (l, w) in logits.iter_mut().zip(row) {
                    *l += hn[k] * *w;
                }
            }
            let max = logits.iter().cloned().fold(T::neg_infinity(), T::max);
            let target_logit = logits[target] - max;
            let mut sum = T::zero();
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                sum += *l;
            }
            for l in logits.iter_mut() {
                *l /= sum;
            }
            out.push(Step {
                log_prob: target_logit - sum.ln(),
                x,
                target,
                h_prev: std::mem::replace(&mut h_prev, hn.clone()),
                c_prev: std::mem::replace(&mut c_prev, c.clone()),
                gates,
                c,
                h: hn,
                probs: logits,
            });
        }
        out
    }

    /// Next-word distribution at every step (after `<s>`, then after each word).
    pub fn step_distributions(&self, sentence: &Sentence) -> Vec<Vec<T>> {
        self.forward(sentence).into_iter().map(|s| s.probs).collect()
    }

    /// Per-step log10 probability of the actual next token, `</s>` last.
    pub fn step_log10_probs(&self, sentence: &Sentence) -> Vec<f64> {
        self.forward(sentence)
            .iter()
            .map(|s| s.log_prob.as_f64() / std::f64::consts::LN_10)
            .collect()
    }

    /// Sum of log10 next-token probabilities including the end of sentence.
    /// Unknown words map to `<unk>`.
    pub fn log10_prob(&self, sentence: &Sentence) -> f64 {
        self.step_log10_probs(sentence).iter().sum()
    }

    /// Cross-entropy (natural log) of the sentence and its gradient.
    pub fn loss_and_gradient(&self, sentence: &Sentence) -> (T, Params<T>) {
        self.loss_and_gradient_with(sentence, GradientFault::None)
    }

    #[doc(hidden)]
    pub fn loss_and_gradient_with(&self, sentence: &Sentence, fault: GradientFault) -> (T, Params<T>) {
        let (e, h, v) = (self.embed_dim, self.hidden_dim, self.vocab.len());
        let p = &self.params;
        let steps = self.forward(sentence);
        let mut grad = Params::zeros(v, e, h);
        let mut loss = T::zero();
        let mut dh_next = vec![T::zero(); h];
        let mut dc_next = vec![T::zero(); h];
        for s in steps.iter().rev() {
            loss -= s.log_prob;
            let mut dlogits = s.probs.clone();
            dlogits[s.target] -= T::one();
            let mut dh = dh_next.clone();
            for k in 0..h {
                let row = &p.proj[k * v..(k + 1) * v];
                let grow = &mut grad.proj[k * v..(k + 1) * v];
                let mut acc = T::zero();
                for j in 0..v {
                    grow[j] += s.h[k] * dlogits[j];
                    acc += row[j] * dlogits[j];
                }
                dh[k] += acc;
            }
            for (gb, d) in grad.proj_b.iter_mut().zip(&dlogits) {
                *gb += *d;
            }
            let mut dz = vec![T::zero(); 4 * h];
            for k in 0..h {
                let (i, f, o, g) = (s.gates[k], s.gates[h + k], s.gates[2 * h + k], s.gates[3 * h + k]);
                let tc = s.c[k].tanh();
                let dc = dh[k] * o * (T::one() - tc * tc) + dc_next[k];
                let c_for_f = match fault {
                    GradientFault::None => s.c_prev[k],
                    GradientFault::ForgetGate => s.c[k],
                };
                dz[k] = dc * g * i * (T::one() - i);
                dz[h + k] = dc * c_for_f * f * (T::one() - f);
                dz[2 * h + k] = dh[k] * tc * o * (T::one() - o);
                dz[3 * h + k] = dc * i * (T::one() - g * g);
                dc_next[k] = dc * f;
            }
            let emb = &p.emb[s.x * e..(s.x + 1) * e];
            let mut demb = vec![T::zero(); e];
            dh_next = vec![T::zero(); h];
            for (r, d) in dz.iter().enumerate() {
                if *d == T::zero() {
                    continue;
                }
                grad.b[r] += *d;
                let row = &p.w[r * (e + h)..(r + 1) * (e + h)];
                let grow = &mut grad.w[r * (e + h)..(r + 1) * (e + h)];
                for k in 0..e {
                    grow[k] += *d * emb[k];
                    demb[k] += *d * row[k];
                }
                for k in 0..h {
                    grow[e + k] += *d * s.h_prev[k];
                    dh_next[k] += *d * row[e + k];
                }
            }
            for (g, d) in grad.emb[s.x * e..(s.x + 1) * e].iter_mut().zip(demb) {
                *g += d;
            }
        }
        (loss, grad)
    }

    /// Natural-log cross-entropy of the sentence, no gradient.
    pub fn loss(&self, sentence: &Sentence) -> T {
        // Compensated summation keeps finite differences of the loss clean.
        let (mut sum, mut comp) = (T::zero(), T::zero());
        for s in self.forward(sentence) {
            let y = -s.log_prob - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// Text container: magic line, `dims V E H`, the vocabulary one word per
    /// line, then each parameter block as a `name rows cols` header followed
    /// by `rows` lines of `cols` numbers (row-major, in [`Params`] order).
    pub fn to_text(&self) -> String {
        let (e, h, v) = (self.embed_dim, self.hidden_dim, self.vocab.len());
        let mut s = format!("{MODEL_MAGIC}\ndims {v} {e} {h}\n");
        for w in &self.vocab {
            s.push_str(w);
            s.push('\n');
        }
        let blocks = [
            ("embedding", v, e, &self.params.emb),
            ("gates_w", 4 * h, e + h, &self.params.w),
            ("gates_b", 1, 4 * h, &self.params.b),
            ("proj_w", h, v, &self.params.proj),
            ("proj_b", 1, v, &self.params.proj_b),
        ];
        for (name, rows, cols, data) in blocks {
            s.push_str(&format!("{name} {rows} {cols}\n"));
            for r in 0..rows {
                let cells: Vec<String> = data[r * cols..(r + 1) * cols].iter().map(|x| format!("{x:e}")).collect();
                s.push_str(&cells.join(" "));
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        const WHAT: &str = "lstm model";
        let lines: Vec<&str> = text.lines().collect();
        let line = |i: usize| {
            lines
                .get(i)
                .copied()
                .ok_or_else(|| Error::parse(WHAT, i + 1, "unexpected end of file"))
        };
        if line(0)? != MODEL_MAGIC {
            return Err(Error::parse(WHAT, 1, "bad header"));
        }
        let dims: Vec<usize> = line(1)?
            .strip_prefix("dims ")
            .ok_or_else(|| Error::parse(WHAT, 2, "expected dims V E H"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(WHAT, 2, "bad dimension")))
            .collect::<Result<_>>()?;
        let [v, e, h] = dims[..] else {
            return Err(Error::parse(WHAT, 2, "expected dims V E H"));
        };
        if v < 3 || e == 0 || h == 0 {
            return Err(Error::parse(WHAT, 2, "dimensions too small"));
        }
        let mut pos = 2;
        let mut vocab = Vec::with_capacity(v);
        for _ in 0..v {
            vocab.push(line(pos)?.to_string());
            pos += 1;
        }
        if vocab[..3] != [SENTENCE_START, SENTENCE_END, UNKNOWN] {
            return Err(Error::parse(WHAT, 3, "vocabulary must start with <s> </s> <unk>"));
        }
        let mut params = Params::zeros(v, e, h);
        let shapes = [
            ("embedding", v, e),
            ("gates_w", 4 * h, e + h),
            ("gates_b", 1, 4 * h),
            ("proj_w", h, v),
            ("proj_b", 1, v),
        ];
        for ((name, rows, cols), block) in shapes.into_iter().zip(params.blocks_mut()) {
            let expect = format!("{name} {rows} {cols}");
            if line(pos)? != expect {
                return Err(Error::parse(WHAT, pos + 1, format!("expected block header {expect:?}")));
            }
            pos += 1;
            for r in 0..rows {
                let row: Vec<T> = line(pos)?
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| Error::parse(WHAT, pos + 1, format!("bad number {t:?}"))))
                    .collect::<Result<_>>()?;
                if row.len() != cols {
                    return Err(Error::parse(WHAT, pos + 1, format!("expected {cols} numbers")));
                }
                block[r * cols..(r + 1) * cols].copy_from_slice(&row);
                pos += 1;
            }
        }
        if !params.is_finite() {
            return Err(Error::parse(WHAT, 0, "non-finite parameter"));
        }
        Ok(LstmLm::with_params(vocab, e, h, params))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_to_string(path)?)
    }
}

/// Sum of log10 next-word probabilities of `sentence`, end of sentence included.
pub fn nll<T: Scalar>(model: &LstmLm<T>, sentence: &Sentence) -> f64 {
    model.log10_prob(sentence)
}

/// Gradients smaller than this are below what a 1e-5 central difference can
/// resolve (its truncation and rounding error is about 1e-10), so they are
/// compared on an absolute scale instead.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Largest relative difference between the analytic gradient and central
/// finite differences (step 1e-5) over every parameter. Relative error is
/// `|a - n| / max(|a|, |n|, GRADIENT_CHECK_FLOOR)`.
pub fn gradient_check(model: &LstmLm<f64>, sentence: &Sentence) -> f64 {
    gradient_check_with(model, sentence, GradientFault::None)
}

#[doc(hidden)]
pub fn gradient_check_with(model: &LstmLm<f64>, sentence: &Sentence, fault: GradientFault) -> f64 {
    const STEP: f64 = 1e-5;
    let (_, analytic) = model.loss_and_gradient_with(sentence, fault);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for b in 0..5 {
        let len = analytic.blocks()[b].len();
        for i in 0..len {
            let orig = probe.params.blocks_mut()[b][i];
            probe.params.blocks_mut()[b][i] = orig + STEP;
            let plus = probe.loss(sentence);
            probe.params.blocks_mut()[b][i] = orig - STEP;
            let minus = probe.loss(sentence);
            probe.params.blocks_mut()[b][i] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = analytic.blocks()[b][i];
            let denom = a.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        crate::corpus::tokenize(text)
    }

    fn small() -> LstmLm<f64> {
        LstmLm::new(["a", "b", "c", "d"], 4, 5, 3).unwrap()
    }

    #[test]
    fn vocab_layout() {
        let m = small();
        assert_eq!(m.vocab()[..4], ["<s>", "</s>", "<unk>", "a"]);
        assert_eq!(m.vocab_size(), 7);
    }

    #[test]
    fn distributions_normalized() {
        let m = small();
        for d in m.step_distributions(&s("a b zzz")) {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_projection_is_uniform() {
        let mut m = small();
        let p = m.params_mut();
        p.proj.iter_mut().for_each(|x| *x = 0.0);
        p.proj_b.iter_mut().for_each(|x| *x = 0.0);
        let score = nll(&m, &s("a b c"));
        assert!((score - (-4.0 * 7f64.log10())).abs() < 1e-12);
    }

    #[test]
    fn gradient_check_passes_and_fault_is_caught() {
        let m = LstmLm::with_init_range(["a", "b", "c", "d"], 4, 5, 3, 0.5).unwrap();
        let sent = s("a b c a d");
        let err = gradient_check(&m, &sent);
        assert!(err < 1e-4, "{err}");
        let bad = gradient_check_with(&m, &sent, GradientFault::ForgetGate);
        assert!(bad > 1e-2, "{bad}");
        assert_eq!(gradient_check(&m, &Sentence::default()), 0.0);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let m = small();
        let back = LstmLm::<f64>::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        let f: LstmLm<f32> = m.cast();
        let back32 = LstmLm::<f32>::from_text(&f.to_text()).unwrap();
        assert_eq!(back32, f);
        assert!(LstmLm::<f64>::from_text("lstm-lm v1\ndims 3 1 1\n").is_err());
    }
}
