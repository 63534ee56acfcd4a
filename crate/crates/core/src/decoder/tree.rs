use std::collections::{BTreeMap, HashMap};

use crate::lexicon::{LexiconEntry, PhoneSet, Pronunciation};
use crate::{Error, Result};

/// A word ending at a tree node, with its log10 pronunciation weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEnd {
    pub word: u32,
    pub log10_weight: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Node {
    /// Index of this node's phone in the tree phone set; unused for the root.
    pub(crate) phone: usize,
    pub(crate) children: BTreeMap<usize, usize>,
    pub(crate) ends: Vec<WordEnd>,
}

/// Lexicon trie over pronunciations. Homophones share a path and are listed
/// together at its last node.
#[derive(Debug, Clone)]
pub struct PrefixTree {
    pub(crate) nodes: Vec<Node>,
    phone_set: PhoneSet,
    words: Vec<String>,
    prons: HashMap<String, Vec<(Pronunciation, f64)>>,
}

pub const ROOT: usize = 0;

impl PrefixTree {
    pub fn phone_set(&self) -> &PhoneSet {
        &self.phone_set
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Weighted pronunciations of `word`, if it is in the tree.
    pub fn pronunciations(&self, word: &str) -> Option<&[(Pronunciation, f64)]> {
        self.prons.get(word).map(Vec::as_slice)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &PrefixTree, n: usize) -> usize {
            t.nodes[n].children.values().map(|&c| 1 + go(t, c)).max().unwrap_or(0)
        }
        go(self, ROOT)
    }

    /// Every (word, pronunciation) path, in depth-first phone-index order.
    pub fn paths(&self) -> Vec<(String, Pronunciation)> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Vec<String>)> = vec![(ROOT, Vec::new())];
        while let Some((n, prefix)) = stack.pop() {
            for e in &self.nodes[n].ends {
                out.push((self.words[e.word as usize].clone(), Pronunciation::new(prefix.clone()).expect("non-root")));
            }
            for (&ph, &c) in self.nodes[n].children.iter().rev() {
                let mut p = prefix.clone();
                p.push(self.phone_set.symbols()[ph].clone());
                stack.push((c, p));
            }
        }
        out
    }

    pub fn num_word_ends(&self) -> usize {
        self.nodes.iter().map(|n| n.ends.len()).sum()
    }
}

pub fn build_prefix_tree(lex: &[LexiconEntry]) -> Result<PrefixTree> {
    if lex.is_empty() {
        return Err(Error::InvalidArgument("empty lexicon".into()));
    }
    let phone_set = PhoneSet::from_lexicon(lex);
    let mut nodes = vec![Node::default()];
    let mut words = Vec::new();
    let mut prons: HashMap<String, Vec<(Pronunciation, f64)>> = HashMap::new();
    for entry in lex {
        if prons.contains_key(&entry.word) {
            return Err(Error::InvalidArgument(format!("word {} listed twice", entry.word)));
        }
        let id = words.len() as u32;
        words.push(entry.word.clone());
        for (pron, weight) in &entry.prons {
            if !(*weight > 0.0 && *weight <= 1.0) {
                return Err(Error::InvalidArgument(format!("weight {weight} of {} outside (0,1]", entry.word)));
            }
            let mut n = ROOT;
            for ph in pron.phones() {
                let pi = phone_set.index_of(ph).expect("phone set built from lexicon");
                n = match nodes[n].children.get(&pi) {
                    Some(&c) => c,
                    None => {
                        nodes.push(Node {
                            phone: pi,
                            ..Node::default()
                        });
                        let c = nodes.len() - 1;
                        nodes[n].children.insert(pi, c);
                        c
                    }
                };
            }
            if nodes[n].ends.iter().any(|e| e.word == id) {
                return Err(Error::InvalidArgument(format!("duplicate pronunciation for {}", entry.word)));
            }
            nodes[n].ends.push(WordEnd {
                word: id,
                log10_weight: weight.log10(),
            });
        }
        prons.insert(entry.word.clone(), entry.prons.clone());
    }
    Ok(PrefixTree {
        nodes,
        phone_set,
        words,
        prons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(w: &str, p: &str) -> LexiconEntry {
        LexiconEntry::from_weighted(w, [(Pronunciation::parse(p).unwrap(), 1.0)]).unwrap()
    }

    #[test]
    fn homophones_share_path() {
        let t = build_prefix_tree(&[entry("meer", "m e r"), entry("mehr", "m e r")]).unwrap();
        assert_eq!(t.num_nodes(), 4);
        assert_eq!(t.num_word_ends(), 2);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn single_word() {
        let t = build_prefix_tree(&[entry("kopf", "g r t")]).unwrap();
        assert_eq!(t.depth(), 3);
        assert_eq!(t.num_word_ends(), 1);
        assert!(build_prefix_tree(&[]).is_err());
    }
}
