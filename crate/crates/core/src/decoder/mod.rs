//! First-pass search: phone posteriors, the lexicon prefix tree, token-passing
//! decoding into n-best lists, and forced alignment.

mod nbest;
mod posterior;
mod search;
mod tree;

pub use nbest::{
    expand_output, nbest_to_jsonl, parse_nbest_jsonl, rank_order, read_nbest, write_nbest, Hypothesis, NBestList,
    NBestRecord,
};
pub use posterior::{simulate_posteriors, PosteriorMatrix};
pub use search::{accumulate_usage, decode, forced_align, DecoderConfig, ForcedAlignment};
pub use tree::{build_prefix_tree, PrefixTree, WordEnd};
