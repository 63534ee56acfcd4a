//! Stage runners. Every stage reads its inputs from disk and writes its
//! outputs under the output root, so any stage can be re-run on its own from
//! saved intermediates.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use dialex::corpus::{
    extract_mappings, mappings_to_tsv, parse_mappings_tsv, read_monolingual, tokenize, word_frequencies,
    write_monolingual,
};
use dialex::decoder::{build_prefix_tree, decode, expand_output, read_nbest, write_nbest};
use dialex::g2p::{evaluate_per, per_report_tsv, read_pronunciation_rows, G2pTestCase};
use dialex::lexicon::{
    add_clitic_entries, assemble_lexicon, filter_by_embedding_vicinity, filter_by_frequency, lexicon_to_tsv,
    read_lexicon, SkippedEntry,
};
use dialex::metrics::{ablation_report, bleu_with, wer, AblationRow};
use dialex::ngram::{
    count_ngrams, estimate_kneser_ney, import_arpa, merge_clitics_in_corpus, to_arpa_string,
    InterpolatedScorer, LmScorer,
};
use dialex::rescorer::{rescore_nbest, train_lstm, write_rescored};
use dialex::{
    CliticInventory, CliticTable, CompoundSplitter, EmbeddingTable, GraphoneModel, LexiconEntry, LstmLm, NBestList,
    ParallelCorpus, PosteriorMatrix, Sentence,
};
use rayon::prelude::*;

use crate::config::Resolved;
use crate::manifest::{file_record, sha256_hex, Manifest, StageRecord, StageStatus};
use crate::synthetic::{generate_synthetic, write_synthetic};
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    GenSynthetic,
    Ingest,
    ExtractMappings,
    TrainG2p,
    EvalG2p,
    BuildLexicon,
    MergeClitics,
    TrainLm,
    Decode,
    Rescore,
    Score,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::GenSynthetic,
        Stage::Ingest,
        Stage::ExtractMappings,
        Stage::TrainG2p,
        Stage::EvalG2p,
        Stage::BuildLexicon,
        Stage::MergeClitics,
        Stage::TrainLm,
        Stage::Decode,
        Stage::Rescore,
        Stage::Score,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenSynthetic => "gen-synthetic",
            Stage::Ingest => "ingest",
            Stage::ExtractMappings => "extract-mappings",
            Stage::TrainG2p => "train-g2p",
            Stage::EvalG2p => "eval-g2p",
            Stage::BuildLexicon => "build-lexicon",
            Stage::MergeClitics => "merge-clitics",
            Stage::TrainLm => "train-lm",
            Stage::Decode => "decode",
            Stage::Rescore => "rescore",
            Stage::Score => "score",
            Stage::Report => "report",
        }
    }

    /// Bumped whenever a stage's output format or behaviour changes.
    pub fn version(self) -> u32 {
        1
    }
}

/// The systems compared in the ablation, in report order.
pub const SYSTEMS: [(&str, &str); 4] = [
    ("baseline", "baseline"),
    ("clitics", "+ clitics"),
    ("compounds", "+ compounds"),
    ("rescored", "+ rescoring"),
];

/// Output locations, relative to the output root.
pub mod out {
    pub const DATA: &str = "data";
    pub const DIALECT_FREQ: &str = "ingest/dialect_freq.tsv";
    pub const STANDARD_FREQ: &str = "ingest/standard_freq.tsv";
    pub const LM_FREQ: &str = "ingest/lm_freq.tsv";
    pub const CANDIDATES: &str = "mappings/candidates.tsv";
    pub const G2P_MODEL: &str = "g2p/model.txt";
    pub const G2P_TRAINING: &str = "g2p/training.tsv";
    pub const G2P_PER: &str = "g2p/per.tsv";
    pub const FILTERED: &str = "lexicon/filtered.tsv";
    pub const LEX_BASELINE: &str = "lexicon/baseline.tsv";
    pub const LEX_CLITICS: &str = "lexicon/clitics.tsv";
    pub const LEX_SKIPPED: &str = "lexicon/skipped.tsv";
    pub const CLITIC_TABLE: &str = "lm/clitic_table.txt";
    pub const MERGED_TEXT: &str = "lm/merged_text.txt";
    pub const PLAIN_ARPA: &str = "lm/plain.arpa";
    pub const MERGED_ARPA: &str = "lm/merged.arpa";
    pub const SPLITTER: &str = "lm/splitter.tsv";
    pub const DECOMP_ARPA: &str = "lm/decompounded.arpa";
    pub const MERGED_DECOMP_ARPA: &str = "lm/merged_decompounded.arpa";
    pub const NBEST_BASELINE: &str = "decode/baseline.jsonl";
    pub const NBEST_CLITICS: &str = "decode/clitics.jsonl";
    pub const NBEST_COMPOUNDS: &str = "decode/compounds.jsonl";
    pub const LSTM: &str = "rescore/lstm.txt";
    pub const LSTM_TRAINING: &str = "rescore/training.tsv";
    pub const RESCORED: &str = "rescore/rescored.jsonl";
    pub const SCORES: &str = "score/scores.tsv";
    pub const HYPOTHESES: &str = "score/hypotheses.tsv";
    pub const REPORT_TXT: &str = "report/ablation.txt";
    pub const REPORT_TSV: &str = "report/ablation.tsv";
}

/// One line of the test list.
#[derive(Debug, Clone, PartialEq)]
pub struct TestItem {
    pub id: String,
    pub posteriors: PathBuf,
    pub reference: Sentence,
}

/// `id TAB posterior path TAB reference`; posterior paths are relative to
/// the list file.
pub fn read_test_list(path: &Path) -> dialex::Result<Vec<TestItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| dialex::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, post, reference] = cols[..] else {
            return Err(dialex::Error::parse("test list", i + 1, "expected 3 TAB-separated columns"));
        };
        if !seen.insert(id.to_string()) {
            return Err(dialex::Error::parse("test list", i + 1, format!("duplicate id {id}")));
        }
        out.push(TestItem {
            id: id.to_string(),
            posteriors: base.join(post),
            reference: tokenize(reference),
        });
    }
    Ok(out)
}

/// Where a stage reads from and writes to.
pub struct StageIo {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
}

impl Resolved {
    fn out(&self, rel: &str) -> PathBuf {
        self.out_dir.join(rel)
    }

    fn outs(&self, rels: &[&str]) -> Vec<PathBuf> {
        rels.iter().map(|r| self.out(r)).collect()
    }

    /// Declared inputs and outputs of `stage`.
    pub fn stage_io(&self, stage: Stage) -> StageIo {
        use out::*;
        let d = &self.data;
        let cfg = &self.config;
        let mut seeds = BTreeMap::new();
        let (inputs, outputs) = match stage {
            Stage::GenSynthetic => {
                if let Some(s) = &cfg.synthetic {
                    seeds.insert("synthetic".to_string(), s.seed);
                }
                let mut outs: Vec<PathBuf> = d.all().iter().map(|(_, p)| p.to_path_buf()).collect();
                outs.extend(self.posterior_files());
                (vec![], outs)
            }
            Stage::Ingest => (
                vec![d.parallel.clone(), d.lm_text.clone()],
                self.outs(&[DIALECT_FREQ, STANDARD_FREQ, LM_FREQ]),
            ),
            Stage::ExtractMappings => (vec![d.parallel.clone()], self.outs(&[CANDIDATES])),
            Stage::TrainG2p => (vec![d.pronunciations.clone()], self.outs(&[G2P_MODEL, G2P_TRAINING])),
            Stage::EvalG2p => (
                vec![self.out(G2P_MODEL), d.pronunciations.clone()],
                self.outs(&[G2P_PER]),
            ),
            Stage::BuildLexicon => (
                vec![self.out(CANDIDATES), d.embeddings.clone(), self.out(G2P_MODEL), d.clitics.clone()],
                self.outs(&[FILTERED, LEX_BASELINE, LEX_CLITICS, LEX_SKIPPED]),
            ),
            Stage::MergeClitics => (
                vec![d.lm_text.clone(), d.clitics.clone()],
                self.outs(&[CLITIC_TABLE, MERGED_TEXT]),
            ),
            Stage::TrainLm => (
                vec![d.lm_text.clone(), self.out(MERGED_TEXT)],
                self.outs(&[PLAIN_ARPA, MERGED_ARPA, SPLITTER, DECOMP_ARPA, MERGED_DECOMP_ARPA]),
            ),
            Stage::Decode => {
                let mut ins = vec![d.test.clone()];
                ins.extend(self.posterior_files());
                ins.extend(self.outs(&[
                    LEX_BASELINE,
                    LEX_CLITICS,
                    CLITIC_TABLE,
                    PLAIN_ARPA,
                    MERGED_ARPA,
                    SPLITTER,
                    DECOMP_ARPA,
                    MERGED_DECOMP_ARPA,
                ]));
                ins.push(d.lm_text.clone());
                (ins, self.outs(&[NBEST_BASELINE, NBEST_CLITICS, NBEST_COMPOUNDS]))
            }
            Stage::Rescore => {
                seeds.insert("lstm".to_string(), cfg.rescorer.train.seed);
                (
                    vec![d.lm_text.clone(), self.out(NBEST_COMPOUNDS)],
                    self.outs(&[LSTM, LSTM_TRAINING, RESCORED]),
                )
            }
            Stage::Score => (
                vec![d.test.clone(), self.out(NBEST_BASELINE), self.out(NBEST_CLITICS), self.out(NBEST_COMPOUNDS), self.out(RESCORED)],
                self.outs(&[SCORES, HYPOTHESES]),
            ),
            Stage::Report => (vec![self.out(SCORES)], self.outs(&[REPORT_TXT, REPORT_TSV])),
        };
        StageIo {
            inputs,
            outputs,
            seeds,
        }
    }

    fn posterior_files(&self) -> Vec<PathBuf> {
        read_test_list(&self.data.test)
            .map(|items| items.into_iter().map(|t| t.posteriors).collect())
            .unwrap_or_default()
    }

    /// Hash of the effective configuration without the output root.
    pub fn config_hash(&self) -> String {
        let mut c = self.config.clone();
        c.output = None;
        sha256_hex(c.to_toml().as_bytes())
    }

    /// Stages `run` executes, in order.
    pub fn planned_stages(&self) -> Vec<Stage> {
        Stage::ALL
            .into_iter()
            .filter(|s| *s != Stage::GenSynthetic || self.config.synthetic.is_some())
            .collect()
    }
}

/// Runs one stage and records it in the manifest (created if absent). On
/// failure the stage is recorded as incomplete and the error returned.
pub fn run_stage(ctx: &Resolved, stage: Stage) -> Result<StageRecord> {
    if stage == Stage::GenSynthetic && ctx.config.synthetic.is_none() {
        return Err(CliError::Validation("gen-synthetic needs a [synthetic] section".into()));
    }
    let io = ctx.stage_io(stage);
    if stage != Stage::GenSynthetic {
        ctx.check_inputs()?;
        if let Some(missing) = io.inputs.iter().find(|p| !p.is_file()) {
            return Err(CliError::MissingInput(missing.clone()));
        }
    }
    let mut manifest = match Manifest::load(&ctx.out_dir)? {
        Some(m) if m.config_sha256 == ctx.config_hash() => m,
        _ => Manifest::new(ctx.config_hash()),
    };
    for dir in io.outputs.iter().filter_map(|p| p.parent()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::stage(stage.name(), e))?;
    }
    let result = execute(ctx, stage);
    // Outputs can only be listed once gen-synthetic has written the test list.
    let io = if stage == Stage::GenSynthetic { ctx.stage_io(stage) } else { io };
    let rec = StageRecord {
        name: stage.name().to_string(),
        version: stage.version(),
        status: if result.is_ok() {
            StageStatus::Complete
        } else {
            StageStatus::Incomplete
        },
        seeds: io.seeds,
        inputs: io.inputs.iter().map(|p| file_record(p, &ctx.out_dir)).collect(),
        outputs: io.outputs.iter().map(|p| file_record(p, &ctx.out_dir)).collect(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    manifest.record(rec.clone());
    manifest.save(&ctx.out_dir)?;
    result.map(|_| rec)
}

/// Validates inputs, then runs every planned stage in order from a fresh
/// manifest. Stops at the first failing stage.
pub fn run_pipeline(ctx: &Resolved) -> Result<Manifest> {
    ctx.check_inputs()?;
    Manifest::new(ctx.config_hash()).save(&ctx.out_dir)?;
    for stage in ctx.planned_stages() {
        run_stage(ctx, stage)?;
    }
    Ok(Manifest::load(&ctx.out_dir)?.expect("saved above"))
}

fn execute(ctx: &Resolved, stage: Stage) -> Result<()> {
    let name = stage.name();
    let err = |e: dialex::Error| CliError::stage(name, e);
    match stage {
        Stage::GenSynthetic => gen_synthetic(ctx),
        Stage::Ingest => ingest(ctx).map_err(err),
        Stage::ExtractMappings => extract(ctx).map_err(err),
        Stage::TrainG2p => train_g2p(ctx).map_err(err),
        Stage::EvalG2p => eval_g2p(ctx).map_err(err),
        Stage::BuildLexicon => build_lexicon(ctx).map_err(err),
        Stage::MergeClitics => merge_clitics(ctx).map_err(err),
        Stage::TrainLm => train_lm(ctx).map_err(err),
        Stage::Decode => decode_stage(ctx),
        Stage::Rescore => rescore(ctx).map_err(err),
        Stage::Score => score(ctx).map_err(err),
        Stage::Report => report(ctx).map_err(err),
    }
}

fn write(path: &Path, text: &str) -> dialex::Result<()> {
    let io = |e| dialex::Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

fn read(path: &Path) -> dialex::Result<String> {
    std::fs::read_to_string(path).map_err(|e| dialex::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn gen_synthetic(ctx: &Resolved) -> Result<()> {
    let s = ctx.config.synthetic.as_ref().expect("checked by run_stage");
    let corpus = generate_synthetic(&s.spec(), &s.sizes())?;
    let dir = ctx.out_dir.join(out::DATA);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| CliError::stage("gen-synthetic", e))?;
    }
    write_synthetic(&corpus, &dir).map_err(|e| CliError::stage("gen-synthetic", e))?;
    Ok(())
}

fn ingest(ctx: &Resolved) -> dialex::Result<()> {
    let pc = ParallelCorpus::read_tsv(&ctx.data.parallel)?;
    let lm = read_monolingual(&ctx.data.lm_text)?;
    write(&ctx.out(out::DIALECT_FREQ), &word_frequencies(&pc.dialect_side()).to_tsv())?;
    write(&ctx.out(out::STANDARD_FREQ), &word_frequencies(&pc.standard_side()).to_tsv())?;
    write(&ctx.out(out::LM_FREQ), &word_frequencies(&lm).to_tsv())
}

fn extract(ctx: &Resolved) -> dialex::Result<()> {
    let pc = ParallelCorpus::read_tsv(&ctx.data.parallel)?;
    let cands = extract_mappings(&pc, ctx.config.mapping.em_iterations)?;
    write(&ctx.out(out::CANDIDATES), &mappings_to_tsv(&cands))
}

fn train_g2p(ctx: &Resolved) -> dialex::Result<()> {
    let rows = read_pronunciation_rows(&ctx.data.pronunciations)?;
    let pairs: Vec<(String, dialex::Pronunciation)> = rows.into_iter().map(|r| (r.word, r.phones)).collect();
    let (model, report) = GraphoneModel::train(&pairs, ctx.config.g2p.train_config())?;
    model.save(&ctx.out(out::G2P_MODEL))?;
    let mut log = String::from("iteration\tlog_likelihood\n");
    for (i, ll) in report.log_likelihoods.iter().enumerate() {
        log.push_str(&format!("{i}\t{ll}\n"));
    }
    for (i, reason) in &report.rejected {
        log.push_str(&format!("# rejected {}: {reason}\n", pairs[*i].0));
    }
    write(&ctx.out(out::G2P_TRAINING), &log)
}

fn eval_g2p(ctx: &Resolved) -> dialex::Result<()> {
    let model = GraphoneModel::load(&ctx.out(out::G2P_MODEL))?;
    let cases: Vec<G2pTestCase> = read_pronunciation_rows(&ctx.data.pronunciations)?
        .into_iter()
        .filter_map(|r| {
            r.category.map(|category| G2pTestCase {
                category,
                word: r.word,
                expected_phones: r.phones,
            })
        })
        .collect();
    let per = evaluate_per(&model, &cases, ctx.config.g2p.beam)?;
    write(&ctx.out(out::G2P_PER), &per_report_tsv(&per))
}

fn build_lexicon(ctx: &Resolved) -> dialex::Result<()> {
    let f = &ctx.config.filter;
    let beam = ctx.config.g2p.beam;
    let cands = parse_mappings_tsv(&read(&ctx.out(out::CANDIDATES))?)?;
    let emb = EmbeddingTable::read(&ctx.data.embeddings)?;
    let filtered = filter_by_frequency(&cands, f.min_count, f.min_prob)?;
    let filtered = filter_by_embedding_vicinity(&filtered, &emb, f.max_cosine_dist)?;
    write(&ctx.out(out::FILTERED), &mappings_to_tsv(&filtered))?;

    let g2p = GraphoneModel::load(&ctx.out(out::G2P_MODEL))?;
    let (baseline, skipped_base) = assemble_lexicon(&filtered, &g2p, beam)?;

    // With clitic handling a contraction is covered by its merged entry, not
    // by whichever single word the word alignment paired it with.
    let inv = CliticInventory::read(&ctx.data.clitics)?;
    let surfaces: BTreeSet<&str> = inv.entries.iter().map(|c| c.dialect_surface.as_str()).collect();
    let kept: Vec<_> = filtered
        .iter()
        .filter(|c| !surfaces.contains(c.dialect_word.as_str()))
        .cloned()
        .collect();
    let (words, skipped_words) = assemble_lexicon(&kept, &g2p, beam)?;
    let (with_clitics, skipped_clitics) = add_clitic_entries(&words, &inv, &g2p, beam)?;

    write(&ctx.out(out::LEX_BASELINE), &lexicon_to_tsv(&baseline))?;
    write(&ctx.out(out::LEX_CLITICS), &lexicon_to_tsv(&with_clitics))?;
    let mut skipped = String::new();
    for (system, list) in [("baseline", &skipped_base), ("clitics", &skipped_words), ("clitics", &skipped_clitics)] {
        for SkippedEntry {
            dialect_word,
            target,
            reason,
        } in list.iter()
        {
            skipped.push_str(&format!("{system}\t{dialect_word}\t{target}\t{reason}\n"));
        }
    }
    write(&ctx.out(out::LEX_SKIPPED), &skipped)
}

fn clitic_table(ctx: &Resolved) -> dialex::Result<CliticTable> {
    let inv = CliticInventory::read(&ctx.data.clitics)?;
    CliticTable::new(inv.merged_tokens(), ctx.config.lm.clitic_lambda)
}

fn merge_clitics(ctx: &Resolved) -> dialex::Result<()> {
    let table = clitic_table(ctx)?;
    let lm = read_monolingual(&ctx.data.lm_text)?;
    write(&ctx.out(out::CLITIC_TABLE), &table.to_text())?;
    write_monolingual(&ctx.out(out::MERGED_TEXT), &merge_clitics_in_corpus(&lm, &table))
}

fn splitter(ctx: &Resolved, lm_text: &[Sentence]) -> dialex::Result<CompoundSplitter> {
    let c = &ctx.config.compounds;
    CompoundSplitter::new(word_frequencies(lm_text), c.min_part_len, c.min_part_count, c.linkers.clone())
}

fn train_lm(ctx: &Resolved) -> dialex::Result<()> {
    let lm = &ctx.config.lm;
    let plain_text = read_monolingual(&ctx.data.lm_text)?;
    let merged_text = read_monolingual(&ctx.out(out::MERGED_TEXT))?;
    let split = splitter(ctx, &plain_text)?;
    let decomp = |c: &[Sentence]| -> Vec<Sentence> { c.iter().map(|s| split.split_sentence(s)).collect() };
    let texts = [
        (out::PLAIN_ARPA, plain_text.clone()),
        (out::MERGED_ARPA, merged_text.clone()),
        (out::DECOMP_ARPA, decomp(&plain_text)),
        (out::MERGED_DECOMP_ARPA, decomp(&merged_text)),
    ];
    for (path, text) in &texts {
        let model = estimate_kneser_ney(&count_ngrams(text, lm.order)?, lm.discount)?;
        write(&ctx.out(path), &to_arpa_string(&model))?;
    }
    write(&ctx.out(out::SPLITTER), &split.config_tsv())
}

fn decode_all<S: LmScorer + Sync>(
    ctx: &Resolved,
    pool: &rayon::ThreadPool,
    items: &[(String, PosteriorMatrix)],
    lex: &[LexiconEntry],
    scorer: &S,
) -> dialex::Result<Vec<NBestList>> {
    let tree = build_prefix_tree(lex)?;
    let cfg = &ctx.config.decoder;
    pool.install(|| {
        items
            .par_iter()
            .map(|(id, post)| decode(post, &tree, scorer, cfg, id))
            .collect()
    })
}

fn decode_stage(ctx: &Resolved) -> Result<()> {
    let err = |e: dialex::Error| CliError::stage("decode", e);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.workers)
        .build()
        .map_err(|e| CliError::stage("decode", e))?;
    let items: Vec<(String, PosteriorMatrix)> = read_test_list(&ctx.data.test)
        .map_err(err)?
        .into_iter()
        .map(|t| Ok((t.id, PosteriorMatrix::read(&t.posteriors)?)))
        .collect::<dialex::Result<_>>()
        .map_err(err)?;

    let lex_base = read_lexicon(&ctx.out(out::LEX_BASELINE)).map_err(err)?;
    let lex_clitic = read_lexicon(&ctx.out(out::LEX_CLITICS)).map_err(err)?;
    let table = CliticTable::read(&ctx.out(out::CLITIC_TABLE), ctx.config.lm.clitic_lambda).map_err(err)?;
    let lm_text = read_monolingual(&ctx.data.lm_text).map_err(err)?;
    let split = CompoundSplitter::from_config_tsv(
        &read(&ctx.out(out::SPLITTER)).map_err(err)?,
        word_frequencies(&lm_text),
    )
    .map_err(err)?;
    let arpa = |p: &str| import_arpa(&ctx.out(p)).map_err(err);
    let plain = arpa(out::PLAIN_ARPA)?;
    let merged = arpa(out::MERGED_ARPA)?;
    let decomp = arpa(out::DECOMP_ARPA)?;
    let merged_decomp = arpa(out::MERGED_DECOMP_ARPA)?;
    let vocab: Vec<&str> = lex_clitic.iter().map(|e| e.word.as_str()).collect();

    let baseline = decode_all(ctx, &pool, &items, &lex_base, &plain).map_err(err)?;
    write_nbest(&ctx.out(out::NBEST_BASELINE), &baseline).map_err(err)?;
    let clitics = InterpolatedScorer::new(&merged, &plain, &table, None, &vocab);
    let lists = decode_all(ctx, &pool, &items, &lex_clitic, &clitics).map_err(err)?;
    write_nbest(&ctx.out(out::NBEST_CLITICS), &lists).map_err(err)?;
    let compounds = InterpolatedScorer::new(&merged_decomp, &decomp, &table, Some(split), &vocab);
    let lists = decode_all(ctx, &pool, &items, &lex_clitic, &compounds).map_err(err)?;
    write_nbest(&ctx.out(out::NBEST_COMPOUNDS), &lists).map_err(err)
}

fn rescore(ctx: &Resolved) -> dialex::Result<()> {
    let r = &ctx.config.rescorer;
    let text = read_monolingual(&ctx.data.lm_text)?;
    let (model, log) = train_lstm::<f64>(&text, r.embed_dim, r.hidden_dim, &r.train)?;
    model.save(&ctx.out(out::LSTM))?;
    let mut t = String::from("epoch\tperplexity\n");
    for (i, p) in log.epoch_perplexity.iter().enumerate() {
        t.push_str(&format!("{}\t{p}\n", i + 1));
    }
    write(&ctx.out(out::LSTM_TRAINING), &t)?;
    // Reload so that a re-run from the saved model scores identically.
    let model = LstmLm::load(&ctx.out(out::LSTM))?;
    let lists = read_nbest(&ctx.out(out::NBEST_COMPOUNDS))?;
    let rescored = lists
        .iter()
        .map(|l| rescore_nbest(l, &model, &r.weights))
        .collect::<dialex::Result<Vec<_>>>()?;
    write_rescored(&ctx.out(out::RESCORED), &rescored)
}

/// Expanded rank-1 output per utterance of an n-best file, in test order.
fn first_best(path: &Path, items: &[TestItem]) -> dialex::Result<Vec<Sentence>> {
    let lists = read_nbest(path)?;
    let by_id: BTreeMap<&str, &NBestList> = lists.iter().map(|l| (l.utterance_id.as_str(), l)).collect();
    items
        .iter()
        .map(|t| {
            let best = by_id
                .get(t.id.as_str())
                .and_then(|l| l.best())
                .ok_or_else(|| dialex::Error::InvalidArgument(format!("{} has no hypothesis for {}", path.display(), t.id)))?;
            Ok(expand_output(&best.words))
        })
        .collect()
}

fn score(ctx: &Resolved) -> dialex::Result<()> {
    let items = read_test_list(&ctx.data.test)?;
    let refs: Vec<Sentence> = items.iter().map(|t| t.reference.clone()).collect();
    let files = [out::NBEST_BASELINE, out::NBEST_CLITICS, out::NBEST_COMPOUNDS, out::RESCORED];
    let mut table = String::from("system\twer\tbleu\tsubstitutions\tdeletions\tinsertions\tref_len\n");
    let mut hyps_by_system = Vec::new();
    for ((system, _), file) in SYSTEMS.iter().zip(files) {
        let hyps = first_best(&ctx.out(file), &items)?;
        let w = wer(&refs, &hyps)?;
        let b = bleu_with(&refs, &hyps, ctx.config.bleu.smoothing())?;
        table.push_str(&format!(
            "{system}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            w.wer_percent, b.bleu_percent, w.substitutions, w.deletions, w.insertions, w.ref_len
        ));
        hyps_by_system.push(hyps);
    }
    let mut hyp_tsv = String::from("id\treference");
    for (system, _) in SYSTEMS {
        hyp_tsv.push('\t');
        hyp_tsv.push_str(system);
    }
    hyp_tsv.push('\n');
    for (i, t) in items.iter().enumerate() {
        hyp_tsv.push_str(&format!("{}\t{}", t.id, t.reference));
        for h in &hyps_by_system {
            hyp_tsv.push_str(&format!("\t{}", h[i]));
        }
        hyp_tsv.push('\n');
    }
    write(&ctx.out(out::SCORES), &table)?;
    write(&ctx.out(out::HYPOTHESES), &hyp_tsv)
}

/// System name, WER and BLEU per line of a scores file.
pub fn parse_scores(text: &str) -> dialex::Result<Vec<(String, f64, f64)>> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cols: Vec<&str> = l.split('\t').collect();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| dialex::Error::parse("scores", i + 1, format!("bad number {s:?}")))
            };
            match cols.as_slice() {
                [system, w, b, ..] => Ok((system.to_string(), num(w)?, num(b)?)),
                _ => Err(dialex::Error::parse("scores", i + 1, "too few columns")),
            }
        })
        .collect()
}

fn report(ctx: &Resolved) -> dialex::Result<()> {
    let scores = parse_scores(&read(&ctx.out(out::SCORES))?)?;
    let rows = SYSTEMS
        .iter()
        .map(|(system, label)| {
            let (_, w, b) = scores
                .iter()
                .find(|(s, _, _)| s == system)
                .ok_or_else(|| dialex::Error::InvalidArgument(format!("scores have no row for {system}")))?;
            Ok(AblationRow::new(label, *w, *b))
        })
        .collect::<dialex::Result<Vec<_>>>()?;
    let table = ablation_report(&rows)?;
    write(&ctx.out(out::REPORT_TXT), &table.text)?;
    write(&ctx.out(out::REPORT_TSV), &table.tsv)
}
