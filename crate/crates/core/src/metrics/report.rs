use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One system configuration and its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub description: String,
    pub wer_percent: f64,
    pub bleu_percent: f64,
}

impl AblationRow {
    pub fn new(description: &str, wer_percent: f64, bleu_percent: f64) -> Self {
        AblationRow {
            description: description.to_string(),
            wer_percent,
            bleu_percent,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub text: String,
    pub tsv: String,
}

/// Relative improvement of each row over the previous one, in percent:
/// `(wer_prev - wer) / wer_prev` and `(bleu - bleu_prev) / bleu_prev`.
/// The first row has none.
pub fn relative_improvements(rows: &[AblationRow]) -> Vec<Option<(f64, f64)>> {
    let mut out = vec![None; rows.len()];
    for i in 1..rows.len() {
        let (p, c) = (&rows[i - 1], &rows[i]);
        let rel = |num: f64, den: f64| if den == 0.0 { 0.0 } else { 100.0 * num / den };
        out[i] = Some((
            rel(p.wer_percent - c.wer_percent, p.wer_percent),
            rel(c.bleu_percent - p.bleu_percent, p.bleu_percent),
        ));
    }
    out
}

pub fn ablation_report(rows: &[AblationRow]) -> Result<AblationTable> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("ablation report needs at least one row".into()));
    }
    let deltas = relative_improvements(rows);
    let desc_w = rows
        .iter()
        .map(|r| r.description.chars().count())
        .max()
        .unwrap_or(0)
        .max("Description".len());

    let mut text = String::new();
    let header = format!(
        "{:>3}  {:<desc_w$}  {:>6}  {:>6}  {:>8}  {:>9}",
        "Row", "Description", "WER", "BLEU", "rel.WER", "rel.BLEU"
    );
    let rule = "-".repeat(header.len());
    writeln!(text, "{rule}\n{header}\n{rule}").unwrap();
    let mut tsv = String::from("row\tdescription\twer\tbleu\trel_wer\trel_bleu\n");
    for (i, (row, delta)) in rows.iter().zip(&deltas).enumerate() {
        let (dw, db) = match delta {
            Some((w, b)) => (format!("{w:.1}%"), format!("{b:.1}%")),
            None => ("-".to_string(), "-".to_string()),
        };
        writeln!(
            text,
            "{:>3}  {:<desc_w$}  {:>6.2}  {:>6.2}  {:>8}  {:>9}",
            i + 1,
            row.description,
            row.wer_percent,
            row.bleu_percent,
            dw,
            db
        )
        .unwrap();
        let (tw, tb) = match delta {
            Some((w, b)) => (format!("{w:.2}"), format!("{b:.2}")),
            None => (String::new(), String::new()),
        };
        writeln!(
            tsv,
            "{}\t{}\t{:.2}\t{:.2}\t{tw}\t{tb}",
            i + 1,
            row.description,
            row.wer_percent,
            row.bleu_percent
        )
        .unwrap();
    }
    writeln!(text, "{rule}").unwrap();
    Ok(AblationTable { text, tsv })
}
