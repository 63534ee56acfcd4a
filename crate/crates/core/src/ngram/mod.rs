//! First-pass count-based language modelling: n-gram counting, interpolated
//! Kneser-Ney estimation, ARPA interchange, decompounding, clitic merging and
//! the scorers the decoder queries.

mod arpa;
mod clitic;
mod compound;
mod counts;
mod kneser_ney;
mod scorer;

pub use arpa::{export_arpa, import_arpa, parse_arpa, to_arpa_string};
pub use clitic::{expand_clitics, merge_clitics_in_corpus, CliticTable, CLITIC_SEPARATOR, DEFAULT_CLITIC_LAMBDA};
pub use compound::{join_compound_parts, split_compounds, CompoundSplitter, COMPOUND_MARKER, DEFAULT_LINKERS};
pub use counts::{count_ngrams, NGramCounts};
pub use kneser_ney::{
    estimate_kneser_ney, estimate_kneser_ney_with, perplexity, KneserNeyLm, KneserNeyOptions, DEFAULT_DISCOUNT,
    DEFAULT_UNK_FLOOR,
};
pub use scorer::{score_interpolated, ExpandingScorer, InterpolatedScorer, LmScorer};

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";
pub const UNKNOWN: &str = "<unk>";
/// Default first-pass order.
pub const DEFAULT_ORDER: usize = 5;
