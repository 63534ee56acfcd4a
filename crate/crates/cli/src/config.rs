//! Versioned TOML pipeline configuration. Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use dialex::{DecoderConfig, ScoreWeights, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::synthetic::{SyntheticDialectSpec, SyntheticSizes};
use crate::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable that overrides the configured output root.
pub const OUTPUT_ENV: &str = "DIALEX_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    /// Threads for utterance-level work in the decode stage.
    #[serde(default = "one")]
    pub workers: usize,
    /// Output root, relative to the config file.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub paths: Option<DataPaths>,
    #[serde(default)]
    pub mapping: MappingSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub g2p: G2pSection,
    #[serde(default)]
    pub lm: LmSection,
    #[serde(default)]
    pub compounds: CompoundSection,
    #[serde(default)]
    pub decoder: DecoderConfig,
    #[serde(default)]
    pub rescorer: RescorerSection,
    #[serde(default)]
    pub bleu: BleuSection,
}

fn one() -> usize {
    1
}

/// Generate the input data instead of reading it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub seed: u64,
    pub train_sentences: usize,
    pub lm_sentences: usize,
    pub test_sentences: usize,
    pub noise: f64,
    pub frames_per_phone: usize,
}

impl SyntheticSection {
    pub fn spec(&self) -> SyntheticDialectSpec {
        SyntheticDialectSpec::bundled(self.seed)
    }

    pub fn sizes(&self) -> SyntheticSizes {
        SyntheticSizes {
            train_sentences: self.train_sentences,
            lm_sentences: self.lm_sentences,
            test_sentences: self.test_sentences,
            noise: self.noise,
            frames_per_phone: self.frames_per_phone,
        }
    }
}

/// Input files. `test` lists `id TAB posterior file TAB reference`, with
/// posterior paths relative to the test file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub parallel: PathBuf,
    pub lm_text: PathBuf,
    pub pronunciations: PathBuf,
    pub clitics: PathBuf,
    pub embeddings: PathBuf,
    pub test: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: &Path) -> Self {
        use crate::synthetic::files::*;
        DataPaths {
            parallel: dir.join(PARALLEL),
            lm_text: dir.join(LM_TEXT),
            pronunciations: dir.join(PRONUNCIATIONS),
            clitics: dir.join(CLITICS),
            embeddings: dir.join(EMBEDDINGS),
            test: dir.join(TEST),
        }
    }

    pub fn all(&self) -> [(&'static str, &Path); 6] {
        [
            ("parallel", &self.parallel),
            ("lm_text", &self.lm_text),
            ("pronunciations", &self.pronunciations),
            ("clitics", &self.clitics),
            ("embeddings", &self.embeddings),
            ("test", &self.test),
        ]
    }

    fn resolve(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        DataPaths {
            parallel: r(&self.parallel),
            lm_text: r(&self.lm_text),
            pronunciations: r(&self.pronunciations),
            clitics: r(&self.clitics),
            embeddings: r(&self.embeddings),
            test: r(&self.test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingSection {
    pub em_iterations: usize,
}

impl Default for MappingSection {
    fn default() -> Self {
        MappingSection {
            em_iterations: dialex::corpus::DEFAULT_EM_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    pub min_count: u64,
    pub min_prob: f64,
    pub max_cosine_dist: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            min_count: 2,
            min_prob: 0.1,
            max_cosine_dist: dialex::lexicon::DEFAULT_MAX_COSINE_DIST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G2pSection {
    pub order: usize,
    pub em_iterations: usize,
    pub discount: f64,
    pub beam: usize,
}

impl Default for G2pSection {
    fn default() -> Self {
        G2pSection {
            order: dialex::g2p::DEFAULT_ORDER,
            em_iterations: dialex::g2p::DEFAULT_EM_ITERATIONS,
            discount: dialex::ngram::DEFAULT_DISCOUNT,
            beam: dialex::g2p::DEFAULT_BEAM,
        }
    }
}

impl G2pSection {
    pub fn train_config(&self) -> dialex::g2p::G2pTrainConfig {
        dialex::g2p::G2pTrainConfig {
            order: self.order,
            em_iterations: self.em_iterations,
            discount: self.discount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmSection {
    pub order: usize,
    pub discount: f64,
    pub clitic_lambda: f64,
}

impl Default for LmSection {
    fn default() -> Self {
        LmSection {
            order: dialex::ngram::DEFAULT_ORDER,
            discount: dialex::ngram::DEFAULT_DISCOUNT,
            clitic_lambda: dialex::ngram::DEFAULT_CLITIC_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompoundSection {
    pub min_part_len: usize,
    pub min_part_count: u64,
    pub linkers: Vec<String>,
}

impl Default for CompoundSection {
    fn default() -> Self {
        CompoundSection {
            min_part_len: 3,
            min_part_count: 1,
            linkers: dialex::ngram::DEFAULT_LINKERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescorerSection {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub train: TrainConfig,
    pub weights: ScoreWeights,
}

impl Default for RescorerSection {
    fn default() -> Self {
        RescorerSection {
            embed_dim: dialex::rescorer::DEFAULT_EMBED_DIM,
            hidden_dim: dialex::rescorer::DEFAULT_HIDDEN_DIM,
            train: TrainConfig::default(),
            weights: ScoreWeights::default(),
        }
    }
}

/// BLEU smoothing; no floor means the plain (unsmoothed) score.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BleuSection {
    pub floor: Option<f64>,
}

impl BleuSection {
    pub fn smoothing(&self) -> dialex::metrics::BleuSmoothing {
        match self.floor {
            Some(f) => dialex::metrics::BleuSmoothing::Floor(f),
            None => dialex::metrics::BleuSmoothing::None,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl PipelineConfig {
    /// Parses TOML text, applying `section.key=value` overrides first.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: PipelineConfig = doc.try_into().map_err(|e: toml::de::Error| invalid(e.to_string()))?;
        cfg.check_params()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parameter ranges, checked against each module's preconditions.
    pub fn check_params(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.workers == 0 {
            return Err(invalid("workers must be at least 1"));
        }
        match (&self.synthetic, &self.paths) {
            (Some(_), Some(_)) => return Err(invalid("give either [synthetic] or [paths], not both")),
            (None, None) => return Err(invalid("one of [synthetic] or [paths] is required")),
            _ => {}
        }
        if let Some(s) = &self.synthetic {
            if s.train_sentences == 0 || s.test_sentences == 0 {
                return Err(invalid("synthetic train_sentences and test_sentences must be at least 1"));
            }
            if !(0.0..1.0).contains(&s.noise) {
                return Err(invalid(format!("synthetic noise {} outside [0,1)", s.noise)));
            }
            if s.frames_per_phone == 0 {
                return Err(invalid("synthetic frames_per_phone must be at least 1"));
            }
        }
        if self.mapping.em_iterations == 0 {
            return Err(invalid("mapping em_iterations must be at least 1"));
        }
        let f = &self.filter;
        if f.min_count < 1 {
            return Err(invalid("filter min_count must be at least 1"));
        }
        if !(0.0..=1.0).contains(&f.min_prob) {
            return Err(invalid(format!("filter min_prob {} outside [0,1]", f.min_prob)));
        }
        if !(0.0..=2.0).contains(&f.max_cosine_dist) {
            return Err(invalid(format!("filter max_cosine_dist {} outside [0,2]", f.max_cosine_dist)));
        }
        let g = &self.g2p;
        if !(1..=5).contains(&g.order) {
            return Err(invalid(format!("g2p order {} outside [1,5]", g.order)));
        }
        if g.em_iterations == 0 || g.beam == 0 {
            return Err(invalid("g2p em_iterations and beam must be at least 1"));
        }
        if !(g.discount > 0.0 && g.discount < 1.0) {
            return Err(invalid(format!("g2p discount {} outside (0,1)", g.discount)));
        }
        let lm = &self.lm;
        if lm.order == 0 {
            return Err(invalid("lm order must be at least 1"));
        }
        if !(lm.discount > 0.0 && lm.discount < 1.0) {
            return Err(invalid(format!("lm discount {} outside (0,1)", lm.discount)));
        }
        if !(0.0..=1.0).contains(&lm.clitic_lambda) {
            return Err(invalid(format!("lm clitic_lambda {} outside [0,1]", lm.clitic_lambda)));
        }
        let c = &self.compounds;
        if c.min_part_len < 3 {
            return Err(invalid("compounds min_part_len must be at least 3"));
        }
        if c.linkers.iter().any(String::is_empty) {
            return Err(invalid("compounds linkers must be non-empty strings"));
        }
        self.decoder.validate().map_err(|e| invalid(format!("decoder: {e}")))?;
        let r = &self.rescorer;
        if r.embed_dim == 0 || r.hidden_dim == 0 {
            return Err(invalid("rescorer embed_dim and hidden_dim must be at least 1"));
        }
        r.train.validate().map_err(|e| invalid(format!("rescorer train: {e}")))?;
        let w = &r.weights;
        if ![w.alpha, w.beta, w.gamma].iter().all(|x| x.is_finite()) {
            return Err(invalid("rescorer weights must be finite"));
        }
        if let Some(fl) = self.bleu.floor {
            if !(fl > 0.0 && fl <= 1.0) {
                return Err(invalid(format!("bleu floor {fl} outside (0,1]")));
            }
        }
        Ok(())
    }
}

/// `section.key=value` or `key=value`; the value is read as a TOML value and
/// falls back to a plain string.
fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("override {spec:?} is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for s in sections {
        let entry = table
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| invalid(format!("override {key:?}: {s} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// A loaded config with its resolved locations.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
    pub data: DataPaths,
}

impl Resolved {
    /// Reads `path`, applies overrides and picks the output root: `out` if
    /// given, else the environment variable, else the config's `output`,
    /// else `dialex-out` next to the config.
    pub fn load(path: &Path, overrides: &[String], out: Option<&Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingInput(path.to_path_buf()))?;
        let config = PipelineConfig::parse(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let out_dir = match out {
            Some(o) => o.to_path_buf(),
            None => match std::env::var_os(OUTPUT_ENV) {
                Some(v) if !v.is_empty() => PathBuf::from(v),
                _ => base.join(config.output.clone().unwrap_or_else(|| PathBuf::from("dialex-out"))),
            },
        };
        Ok(Self::new(config, base, out_dir))
    }

    pub fn new(config: PipelineConfig, base: &Path, out_dir: PathBuf) -> Self {
        let data = match &config.paths {
            Some(p) => p.resolve(base),
            None => DataPaths::in_dir(&out_dir.join("data")),
        };
        Resolved { config, out_dir, data }
    }

    /// External inputs must exist before anything runs.
    pub fn check_inputs(&self) -> Result<()> {
        if self.config.synthetic.is_some() {
            return Ok(());
        }
        for (_, p) in self.data.all() {
            if !p.is_file() {
                return Err(CliError::MissingInput(p.to_path_buf()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "version = 1\n[synthetic]\nseed = 1\ntrain_sentences = 10\nlm_sentences = 10\ntest_sentences = 2\nnoise = 0.3\nframes_per_phone = 2\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = PipelineConfig::parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.decoder, DecoderConfig::default());
        assert_eq!(c.filter.min_count, 2);
        assert_eq!(PipelineConfig::parse(&c.to_toml(), &[]).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in ["typo = 1\n", "[filter]\nmin_prob = 0.1\nmin_cnt = 2\n", "[decoder]\nbeam = 3\n"] {
            let err = PipelineConfig::parse(&format!("{MINIMAL}{extra}"), &[]).unwrap_err();
            assert!(matches!(err, CliError::Validation(_)), "{extra}");
        }
    }

    #[test]
    fn overrides_and_ranges() {
        let c = PipelineConfig::parse(MINIMAL, &["decoder.n_best=7".into(), "workers=3".into()]).unwrap();
        assert_eq!((c.decoder.n_best, c.workers), (7, 3));
        for bad in ["filter.min_prob=1.5", "lm.order=0", "synthetic.noise=1.0", "version=2", "g2p.order=9"] {
            assert!(PipelineConfig::parse(MINIMAL, &[bad.into()]).is_err(), "{bad}");
        }
        assert!(PipelineConfig::parse("version = 1\n", &[]).is_err());
    }

    #[test]
    fn missing_input_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let text = "version = 1\n[paths]\nparallel = \"p.tsv\"\nlm_text = \"l.txt\"\npronunciations = \"x\"\nclitics = \"c\"\nembeddings = \"e\"\ntest = \"t\"\n";
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, text).unwrap();
        let r = Resolved::load(&cfg, &[], Some(dir.path())).unwrap();
        assert!(matches!(r.check_inputs(), Err(CliError::MissingInput(p)) if p.ends_with("p.tsv")));
    }
}
