//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::Resolved;
use crate::pipeline::{out, run_pipeline, run_stage, Stage};
use crate::{CliError, Result, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "dialex", version, about = "Dialect-to-standard speech translation pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(short, long, global = true, default_value = "dialex.toml")]
    pub config: PathBuf,

    /// Output root; overrides DIALEX_OUT and the config's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Override a config key, e.g. `--set decoder.beam_width=12`.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,

    /// Shorthand for `--set workers=N`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Shorthand for `--set synthetic.seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Shorthand for `--set synthetic.noise=X`.
    #[arg(long, global = true)]
    pub noise: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Word frequency tables of the input corpora.
    Ingest,
    /// Dialect-to-standard word mappings by word alignment.
    ExtractMappings,
    /// Filter mappings and write the pronunciation lexicons.
    BuildLexicon,
    /// Train the grapheme-to-phoneme model.
    TrainG2p,
    /// Phone error rate of the G2P model per category.
    EvalG2p,
    /// Estimate the first-pass n-gram models.
    TrainLm,
    /// Merge clitic word pairs in the LM text.
    MergeClitics,
    /// First-pass decoding of the test posteriors.
    Decode,
    /// Train the LSTM and rescore the n-best lists.
    Rescore,
    /// WER and BLEU of every system.
    Score,
    /// Render the ablation table.
    Report,
    /// Write the synthetic data set.
    GenSynthetic,
    /// Every stage in order.
    Run,
}

impl Command {
    pub fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Ingest => Stage::Ingest,
            Command::ExtractMappings => Stage::ExtractMappings,
            Command::BuildLexicon => Stage::BuildLexicon,
            Command::TrainG2p => Stage::TrainG2p,
            Command::EvalG2p => Stage::EvalG2p,
            Command::TrainLm => Stage::TrainLm,
            Command::MergeClitics => Stage::MergeClitics,
            Command::Decode => Stage::Decode,
            Command::Rescore => Stage::Rescore,
            Command::Score => Stage::Score,
            Command::Report => Stage::Report,
            Command::GenSynthetic => Stage::GenSynthetic,
            Command::Run => return None,
        })
    }
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.overrides.clone();
        if let Some(w) = self.workers {
            o.push(format!("workers={w}"));
        }
        if let Some(s) = self.seed {
            o.push(format!("synthetic.seed={s}"));
        }
        if let Some(n) = self.noise {
            o.push(format!("synthetic.noise={n}"));
        }
        o
    }

    pub fn execute(&self) -> Result<()> {
        let ctx = Resolved::load(&self.config, &self.overrides(), self.out.as_deref())?;
        match self.command.stage() {
            Some(stage) => {
                let rec = run_stage(&ctx, stage)?;
                println!("{}: {} outputs written", rec.name, rec.outputs.len());
            }
            None => {
                run_pipeline(&ctx)?;
                let report = std::fs::read_to_string(ctx.out_dir.join(out::REPORT_TXT))
                    .map_err(|e| CliError::stage("report", e))?;
                print!("{report}");
            }
        }
        Ok(())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.execute() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
