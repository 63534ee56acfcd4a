//! Word error rate, BLEU and the ablation table used to report results.

mod bleu;
mod report;
mod wer;

pub use bleu::{bleu, bleu_with, BleuReport, BleuSmoothing};
pub use report::{ablation_report, relative_improvements, AblationRow, AblationTable};
pub use wer::{align_counts, edit_distance, wer, AlignmentCounts, WerBreakdown};
