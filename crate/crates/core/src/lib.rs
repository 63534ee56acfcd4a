//! Toolkit for recognizing dialect speech directly as standard-language text.
//!
//! The translation step lives inside the pronunciation lexicon (standard words
//! carrying dialect pronunciations) and inside the first-pass language model
//! (clitic merging, decompounding). A frame-synchronous decoder turns phone
//! posteriors into n-best lists, which an LSTM language model rescores.
//!
//! Numeric containers that do not depend on a particular float width are
//! generic over [`Scalar`]; the aliases below fix them to `f64`, which is what
//! the rest of the toolkit uses.

pub mod corpus;
pub mod decoder;
pub mod error;
pub mod g2p;
pub mod lexicon;
pub mod metrics;
pub mod ngram;
pub mod rescorer;
pub mod scalar;
mod util;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use corpus::{FrequencyTable, MappingCandidate, ParallelCorpus, Sentence};
pub use decoder::{DecoderConfig, Hypothesis, NBestList, PrefixTree};
pub use g2p::{Graphone, GraphoneModel};
pub use lexicon::{CliticInventory, LexiconEntry, PhoneSet, Pronunciation};
pub use metrics::{AblationRow, BleuReport, WerBreakdown};
pub use ngram::{CliticTable, CompoundSplitter, KneserNeyLm, NGramCounts};
pub use rescorer::{ScoreWeights, TrainConfig};

/// Word embeddings with `f64` components.
pub type EmbeddingTable = lexicon::EmbeddingTable<f64>;
/// Phone posteriors with `f64` probabilities.
pub type PosteriorMatrix = decoder::PosteriorMatrix<f64>;
/// Double-precision LSTM language model.
pub type LstmLm = rescorer::LstmLm<f64>;
/// Single-precision LSTM language model, for storage-constrained use.
pub type LstmLmF32 = rescorer::LstmLm<f32>;
