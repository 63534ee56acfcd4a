//! Second pass: an LSTM language model trained from scratch and log-linear
//! n-best rescoring.

mod lstm;
mod rescore;
mod train;

pub use lstm::{gradient_check, nll, LstmLm, Params, GRADIENT_CHECK_FLOOR};
#[doc(hidden)]
pub use lstm::{gradient_check_with, GradientFault};
pub use rescore::{
    rescore_nbest, rescored_to_jsonl, tune_weights, write_rescored, RescoredHypothesis, RescoredNBest, ScoreWeights,
};
pub use train::{corpus_perplexity, train_lstm, TrainConfig, TrainingLog};

/// Default embedding size.
pub const DEFAULT_EMBED_DIM: usize = 16;
/// Default hidden size.
pub const DEFAULT_HIDDEN_DIM: usize = 32;
