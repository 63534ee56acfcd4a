use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lexicon::{PhoneSet, Pronunciation};
use crate::scalar::Scalar;
use crate::util::{read_to_string, write_string};
use crate::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-6;

/// Per-frame probability distributions over a phone set.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix<T: Scalar> {
    phone_set: PhoneSet,
    frames: Vec<Vec<T>>,
}

impl<T: Scalar> PosteriorMatrix<T> {
    /// Every row must have one non-negative entry per phone and sum to 1.
    pub fn new(phone_set: PhoneSet, frames: Vec<Vec<T>>) -> Result<Self> {
        for (t, row) in frames.iter().enumerate() {
            if row.len() != phone_set.len() {
                return Err(Error::InvalidArgument(format!(
                    "frame {t} has {} entries for {} phones",
                    row.len(),
                    phone_set.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < T::zero()) {
                return Err(Error::InvalidArgument(format!("frame {t} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().map(|p| p.as_f64()).sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidArgument(format!("frame {t} sums to {sum}")));
            }
        }
        Ok(PosteriorMatrix { phone_set, frames })
    }

    pub fn phone_set(&self) -> &PhoneSet {
        &self.phone_set
    }

    pub fn frames(&self) -> &[Vec<T>] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// log10 posterior of phone column `phone` at frame `t`.
    pub fn log10(&self, t: usize, phone: usize) -> f64 {
        crate::util::log10(self.frames[t][phone].as_f64())
    }

    /// Text format: `num_frames num_phones`, the phone names, then one row per frame.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n{}\n", self.frames.len(), self.phone_set.len(), self.phone_set.symbols().join(" "));
        for row in &self.frames {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:e}")).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "posteriors";
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::parse(WHAT, 1, "missing header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(WHAT, 1, "bad header")))
            .collect::<Result<_>>()?;
        let [n_frames, n_phones] = dims[..] else {
            return Err(Error::parse(WHAT, 1, "header must be `num_frames num_phones`"));
        };
        let names = lines.next().ok_or_else(|| Error::parse(WHAT, 2, "missing phone names"))?;
        let phone_set = PhoneSet::new(names.split_whitespace().map(str::to_string))
            .map_err(|e| Error::parse(WHAT, 2, e.to_string()))?;
        if phone_set.len() != n_phones {
            return Err(Error::parse(WHAT, 2, format!("expected {n_phones} phone names")));
        }
        let mut frames = Vec::with_capacity(n_frames);
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<T> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(WHAT, i + 3, format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            frames.push(row);
        }
        if frames.len() != n_frames {
            return Err(Error::parse(WHAT, 1, format!("header says {n_frames} frames, found {}", frames.len())));
        }
        PosteriorMatrix::new(phone_set, frames).map_err(|e| Error::parse(WHAT, 0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_string(path, &self.to_text())
    }
}

/// Stand-in for an acoustic model. Each phone lasts `frames_per_phone`
/// frames plus a seeded jitter of -1, 0 or +1 (never below one frame); each
/// frame gives `1 - noise` to the true phone and spreads `noise` evenly over
/// the other phones.
pub fn simulate_posteriors<T: Scalar>(
    phone_set: &PhoneSet,
    words: &[Pronunciation],
    frames_per_phone: usize,
    noise: f64,
    seed: u64,
) -> Result<PosteriorMatrix<T>> {
    if !(0.0..1.0).contains(&noise) {
        return Err(Error::InvalidArgument(format!("noise {noise} outside [0,1)")));
    }
    if frames_per_phone == 0 {
        return Err(Error::InvalidArgument("frames_per_phone must be at least 1".into()));
    }
    let k = phone_set.len();
    if k < 2 && noise > 0.0 {
        return Err(Error::InvalidArgument("noise needs at least two phones".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let other = if k > 1 { noise / (k - 1) as f64 } else { 0.0 };
    let mut frames = Vec::new();
    for phone in words.iter().flat_map(|p| p.phones()) {
        let idx = phone_set
            .index_of(phone)
            .ok_or_else(|| Error::PhoneSetMismatch(format!("phone {phone:?} not in the phone set")))?;
        let jitter: i64 = rng.gen_range(-1..=1);
        let dur = (frames_per_phone as i64 + jitter).max(1) as usize;
        let mut row = vec![T::from_f64_lossy(other); k];
        row[idx] = T::from_f64_lossy(1.0 - noise);
        for _ in 0..dur {
            frames.push(row.clone());
        }
    }
    PosteriorMatrix::new(phone_set.clone(), frames)
}
