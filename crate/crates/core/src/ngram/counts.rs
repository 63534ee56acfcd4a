use std::collections::BTreeMap;

use crate::corpus::Sentence;
use crate::{Error, Result};

use super::{SENTENCE_END, SENTENCE_START};

/// Raw n-gram counts for lengths `1..=order`.
///
/// Each sentence is padded with `order - 1` start symbols and one end symbol;
/// only n-grams ending in a real word or the end symbol are counted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    order: usize,
    /// Index `n - 1` holds the n-grams.
    by_order: Vec<BTreeMap<Vec<String>, u64>>,
}

impl NGramCounts {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.by_order[0].is_empty()
    }

    pub fn get(&self, ngram: &[&str]) -> u64 {
        let n = ngram.len();
        if n == 0 || n > self.order {
            return 0;
        }
        let key: Vec<String> = ngram.iter().map(|s| s.to_string()).collect();
        self.by_order[n - 1].get(&key).copied().unwrap_or(0)
    }

    /// All n-grams of length `n` with their counts, in sorted order.
    pub fn iter_order(&self, n: usize) -> impl Iterator<Item = (&[String], u64)> {
        self.by_order[n - 1].iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn len_order(&self, n: usize) -> usize {
        self.by_order[n - 1].len()
    }
}

pub fn count_ngrams(corpus: &[Sentence], order: usize) -> Result<NGramCounts> {
    if !(1..=5).contains(&order) {
        return Err(Error::InvalidArgument(format!("order {order} outside [1,5]")));
    }
    let mut by_order = vec![BTreeMap::new(); order];
    for sentence in corpus {
        let mut padded: Vec<&str> = vec![SENTENCE_START; order - 1];
        padded.extend(sentence.iter().map(String::as_str));
        padded.push(SENTENCE_END);
        for end in (order - 1)..padded.len() {
            for n in 1..=order {
                let gram: Vec<String> = padded[end + 1 - n..=end].iter().map(|s| s.to_string()).collect();
                *by_order[n - 1].entry(gram).or_insert(0) += 1;
            }
        }
    }
    Ok(NGramCounts { order, by_order })
}
