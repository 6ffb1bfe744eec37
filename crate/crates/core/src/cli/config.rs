//! Pipeline configuration: one TOML file, `TWP_SECTION__KEY` environment
//! overrides, full validation up front and a resolved snapshot per run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenizer::DEFAULT_EOS_TOKEN;
use crate::corpus::TokenCounter;
use crate::dedup::DedupParams;
use crate::lang::Lang;
use crate::mixer::{MixtureSpec, DEFAULT_SHUFFLE_BUFFER};
use crate::pack::DEFAULT_SEQ_LEN;
use crate::probe::{LangIdModel, ProbeParams, DEFAULT_MARGIN_THRESHOLD};
use crate::quality::RuleConfig;
use crate::seeds::sub_seed;
use crate::segment::{ChunkConfig, Segmenter};
use crate::translate::{
    CipherBackend, CompletionBackend, EchoBackend, GenerationParams, HttpBackend, HttpConfig, PromptTemplate,
    RetryPolicy, DEFAULT_MAX_IN_FLIGHT,
};

pub const ENV_PREFIX: &str = "TWP_";
pub const SNAPSHOT_FILE: &str = "config.resolved.toml";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration")?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn one(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { issues: vec![ConfigIssue { field: field.into(), message: message.into() }] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    #[default]
    Bpe,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSection {
    pub kind: TokenizerKind,
    /// Both unset means the bundled vocabulary.
    pub vocab: Option<PathBuf>,
    pub merges: Option<PathBuf>,
    pub eos_token: String,
    /// Refuse to run if the loaded tokenizer has a different fingerprint.
    pub fingerprint: Option<String>,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        Self {
            kind: TokenizerKind::Bpe,
            vocab: None,
            merges: None,
            eos_token: DEFAULT_EOS_TOKEN.into(),
            fingerprint: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    /// Directory of `<lang>.txt` abbreviation lists; bundled lists otherwise.
    pub abbreviations_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Echo,
    Cipher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub max_in_flight: usize,
    pub temperature: f32,
    /// Defaults to twice the chunk limit.
    pub max_tokens: Option<u32>,
    /// Prompt for unconditioned generation (the served model's BOS convention).
    pub bos_prompt: String,
    pub http: HttpConfig,
    pub retry: RetryPolicy,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Http,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            temperature: 0.0,
            max_tokens: None,
            bos_prompt: "<s>".into(),
            http: HttpConfig::default(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateSection {
    /// Whether `pipeline` runs the translation stage.
    pub enabled: bool,
    pub targets: Vec<Lang>,
    pub window: usize,
}

impl Default for TranslateSection {
    fn default() -> Self {
        Self { enabled: false, targets: vec![Lang::Fr, Lang::De, Lang::Es], window: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSection {
    /// Derived from the global seed when unset.
    pub seed: Option<u64>,
    pub threshold: f64,
    pub num_perm: usize,
    pub bands: usize,
    pub rows: usize,
    pub shingle_n: usize,
    pub exact: bool,
}

impl Default for DedupSection {
    fn default() -> Self {
        let d = DedupParams::default();
        Self {
            seed: None,
            threshold: d.threshold,
            num_perm: d.num_perm,
            bands: d.bands,
            rows: d.rows,
            shingle_n: d.shingle_n,
            exact: d.exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    /// Stage spec used by `pipeline`; unset means one equal-budget source
    /// per language present.
    pub pipeline_stage: Option<String>,
    /// Shuffle buffer for the equal-budget default mixture.
    pub shuffle_buffer: usize,
    pub stages: Vec<MixtureSpec>,
}

impl Default for MixSection {
    fn default() -> Self {
        Self { pipeline_stage: None, shuffle_buffer: DEFAULT_SHUFFLE_BUFFER, stages: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PackSection {
    pub seq_len: u32,
}

impl Default for PackSection {
    fn default() -> Self {
        Self { seq_len: DEFAULT_SEQ_LEN }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub samples: usize,
    pub max_tokens: u32,
    pub temperature: f32,
    pub seed: Option<u64>,
    pub margin_threshold: f64,
    /// Saved language-ID model; the bundled one otherwise.
    pub model: Option<PathBuf>,
    /// Train from `<lang>.txt` seed files in this directory instead.
    pub seeds_dir: Option<PathBuf>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = ProbeParams::default();
        Self {
            samples: p.samples,
            max_tokens: p.max_tokens,
            temperature: p.temperature,
            seed: None,
            margin_threshold: DEFAULT_MARGIN_THRESHOLD,
            model: None,
            seeds_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for parallel stages; 0 uses every core.
    pub workers: usize,
    /// Abort on malformed input lines instead of recording them.
    pub strict: bool,
    pub tokenizer: TokenizerSection,
    pub segment: SegmentSection,
    pub chunking: ChunkConfig,
    pub prompt: PromptTemplate,
    pub backend: BackendSection,
    pub translate: TranslateSection,
    pub quality: RuleConfig,
    pub dedup: DedupSection,
    pub mix: MixSection,
    pub pack: PackSection,
    pub probe: ProbeSection,
}

/// Parses a raw override value as a TOML value, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn apply_override(root: &mut toml::Table, var: &str, raw: &str) -> Result<(), ConfigError> {
    let keys: Vec<String> = var[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
    if keys.iter().any(String::is_empty) {
        return Err(ConfigError::one(var, "malformed override name"));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table.entry(k.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::one(var, format!("`{k}` is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].clone(), override_value(raw));
    Ok(())
}

impl PipelineConfig {
    /// Parses TOML text, applies `TWP_*` overrides from `env`, and validates.
    pub fn from_toml<I>(text: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| ConfigError::one("<file>", e.message()))?;
        let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        vars.sort();
        for (k, v) in &vars {
            apply_override(&mut table, k, v)?;
        }
        let merged = toml::to_string(&table).expect("table serializes");
        let de = toml::Deserializer::new(&merged);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let message = e.inner().message().to_string();
            ConfigError::one(if field == "." { "<root>".into() } else { field }, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or defaults when `None`) with overrides from `env`.
    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let text = match path {
            Some(p) => {
                std::fs::read_to_string(p).map_err(|e| ConfigError::one("--config", format!("{}: {e}", p.display())))?
            }
            None => String::new(),
        };
        Self::from_toml(&text, env)
    }

    /// Checks every section, collecting all problems.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| issues.push(ConfigIssue { field: field.into(), message });

        if self.seed > i64::MAX as u64 {
            bad("seed", format!("must be at most {}", i64::MAX));
        }
        let tk = &self.tokenizer;
        if tk.kind == TokenizerKind::Bpe && tk.vocab.is_some() != tk.merges.is_some() {
            bad("tokenizer", "set both `vocab` and `merges`, or neither".into());
        }
        for (name, p) in [("tokenizer.vocab", &tk.vocab), ("tokenizer.merges", &tk.merges)] {
            if let Some(p) = p.as_ref().filter(|p| !p.is_file()) {
                bad(name, format!("no such file: {}", p.display()));
            }
        }
        if let Some(d) = self.segment.abbreviations_dir.as_ref().filter(|d| !d.is_dir()) {
            bad("segment.abbreviations_dir", format!("no such directory: {}", d.display()));
        }
        if self.chunking.limit == 0 {
            bad("chunking.limit", "must be at least 1".into());
        }
        if let Err(e) = self.prompt.validate() {
            bad("prompt", e.to_string());
        }

        let b = &self.backend;
        if b.max_in_flight == 0 {
            bad("backend.max_in_flight", "must be at least 1".into());
        }
        if !(b.temperature.is_finite() && b.temperature >= 0.0) {
            bad("backend.temperature", "must be a non-negative number".into());
        }
        if b.kind == BackendKind::Http && !b.http.endpoint.starts_with("http") {
            bad("backend.http.endpoint", format!("`{}` is not an http(s) URL", b.http.endpoint));
        }
        if b.retry.attempts == 0 {
            bad("backend.retry.attempts", "must be at least 1".into());
        }
        if !(b.retry.multiplier.is_finite() && b.retry.multiplier >= 1.0) {
            bad("backend.retry.multiplier", "must be at least 1".into());
        }

        let t = &self.translate;
        if t.targets.is_empty() {
            bad("translate.targets", "at least one target language required".into());
        }
        for l in &t.targets {
            if !l.is_target() {
                bad("translate.targets", format!("`{l}` is not a translation target"));
            }
        }
        if t.window == 0 {
            bad("translate.window", "must be at least 1".into());
        }

        for rule in crate::quality::RuleId::ALL {
            let q = &self.quality;
            let (name, lo, hi) = match rule {
                crate::quality::RuleId::WordCount => ("quality.word_count", q.word_count.min, q.word_count.max),
                crate::quality::RuleId::MeanWordLength => {
                    ("quality.mean_word_length", q.mean_word_length.min, q.mean_word_length.max)
                }
                _ => continue,
            };
            if lo > hi {
                bad(name, format!("min {lo} exceeds max {hi}"));
            }
        }
        for (lang, p) in &self.quality.stopword_paths {
            if !p.is_file() {
                bad(&format!("quality.stopword_paths.{lang}"), format!("no such file: {}", p.display()));
            }
        }

        if let Err(e) = self.dedup_params().validate() {
            bad("dedup", e);
        }

        let mut names = std::collections::BTreeSet::new();
        for (i, spec) in self.mix.stages.iter().enumerate() {
            let field = format!("mix.stages[{i}]");
            if !names.insert(spec.stage.as_str()) {
                bad(&field, format!("duplicate stage `{}`", spec.stage));
            }
            if let Err(e) = spec.budgets() {
                bad(&field, e.to_string());
            }
            for s in &spec.sources {
                let pipeline_ref = s.path.to_str().is_some_and(|p| p.starts_with(PIPELINE_SOURCE_PREFIX));
                if !pipeline_ref && !s.path.is_file() {
                    bad(&field, format!("source `{}`: no such file {}", s.name, s.path.display()));
                }
            }
        }
        if let Some(stage) = &self.mix.pipeline_stage {
            if !self.mix.stages.iter().any(|s| &s.stage == stage) {
                bad("mix.pipeline_stage", format!("no stage named `{stage}`"));
            }
        }

        if self.pack.seq_len < 2 {
            bad("pack.seq_len", "must be at least 2".into());
        }

        let p = &self.probe;
        if p.samples == 0 {
            bad("probe.samples", "must be at least 1".into());
        }
        if !(p.margin_threshold.is_finite() && p.margin_threshold >= 0.0) {
            bad("probe.margin_threshold", "must be a non-negative number".into());
        }
        if p.model.is_some() && p.seeds_dir.is_some() {
            bad("probe", "set at most one of `model` and `seeds_dir`".into());
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    /// Fills every derived seed so the snapshot is self-contained.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.dedup.seed.get_or_insert(sub_seed(self.seed, "dedup"));
        c.probe.seed.get_or_insert(sub_seed(self.seed, "probe"));
        for spec in &mut c.mix.stages {
            spec.seed.get_or_insert(sub_seed(self.seed, &format!("mix/{}", spec.stage)));
        }
        c
    }

    pub fn snapshot(&self) -> String {
        toml::to_string(&self.resolved()).expect("config serializes")
    }

    pub fn write_snapshot(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(SNAPSHOT_FILE), self.snapshot())
    }

    pub fn dedup_params(&self) -> DedupParams {
        let d = &self.dedup;
        DedupParams {
            seed: d.seed.unwrap_or_else(|| sub_seed(self.seed, "dedup")),
            threshold: d.threshold,
            num_perm: d.num_perm,
            bands: d.bands,
            rows: d.rows,
            shingle_n: d.shingle_n,
            exact: d.exact,
        }
    }

    pub fn probe_params(&self) -> ProbeParams {
        let p = &self.probe;
        ProbeParams {
            samples: p.samples,
            max_tokens: p.max_tokens,
            temperature: p.temperature,
            prompt: self.backend.bos_prompt.clone(),
            seed: p.seed.unwrap_or_else(|| sub_seed(self.seed, "probe")),
            margin_threshold: p.margin_threshold,
            max_in_flight: self.backend.max_in_flight,
        }
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams { max_tokens: self.backend.max_tokens, temperature: self.backend.temperature }
    }

    pub fn token_counter(&self) -> Result<TokenCounter, ConfigError> {
        let tk = &self.tokenizer;
        let counter = match (tk.kind, &tk.vocab, &tk.merges) {
            (TokenizerKind::Whitespace, _, _) => TokenCounter::whitespace(0),
            (TokenizerKind::Bpe, Some(v), Some(m)) => TokenCounter::bpe_from_files(v, m, &tk.eos_token)
                .map_err(|e| ConfigError::one("tokenizer", e.to_string()))?,
            (TokenizerKind::Bpe, _, _) => TokenCounter::bundled_bpe(),
        };
        if let Some(fp) = tk.fingerprint.as_deref().filter(|fp| *fp != counter.fingerprint()) {
            return Err(ConfigError::one(
                "tokenizer.fingerprint",
                format!("expected {fp}, loaded tokenizer has {}", counter.fingerprint()),
            ));
        }
        Ok(counter)
    }

    pub fn segmenter(&self) -> Result<Segmenter, ConfigError> {
        match &self.segment.abbreviations_dir {
            Some(d) => Segmenter::from_dir(d).map_err(|e| ConfigError::one("segment.abbreviations_dir", e.to_string())),
            None => Ok(Segmenter::bundled()),
        }
    }

    pub fn backend(&self) -> Box<dyn CompletionBackend> {
        match self.backend.kind {
            BackendKind::Echo => Box::new(EchoBackend),
            BackendKind::Cipher => Box::new(CipherBackend),
            BackendKind::Http => Box::new(HttpBackend::new(self.backend.http.clone())),
        }
    }

    pub fn langid_model(&self) -> Result<LangIdModel, ConfigError> {
        let p = &self.probe;
        if let Some(path) = &p.model {
            return LangIdModel::load(path).map_err(|e| ConfigError::one("probe.model", e.to_string()));
        }
        let Some(dir) = &p.seeds_dir else {
            return Ok(LangIdModel::bundled());
        };
        let mut texts: BTreeMap<Lang, String> = BTreeMap::new();
        for lang in [Lang::En, Lang::Fr, Lang::De, Lang::Es] {
            let path = dir.join(format!("{}.txt", lang.code()));
            if path.is_file() {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError::one("probe.seeds_dir", format!("{}: {e}", path.display())))?;
                texts.insert(lang, text);
            }
        }
        LangIdModel::train(texts.iter().map(|(l, t)| (*l, t.lines())))
            .map_err(|e| ConfigError::one("probe.seeds_dir", e.to_string()))
    }
}

/// A mixture source path like `pipeline:fr` refers to the documents of that
/// language produced by the earlier pipeline stages.
pub const PIPELINE_SOURCE_PREFIX: &str = "pipeline:";

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::from_toml("", env(&[])).unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.chunking.limit, 300);
        assert_eq!(c.pack.seq_len, 2048);
    }

    #[test]
    fn env_overrides_nested_keys() {
        let c = PipelineConfig::from_toml(
            "[chunking]\nlimit = 100\n",
            env(&[
                ("TWP_CHUNKING__LIMIT", "200"),
                ("TWP_SEED", "7"),
                ("TWP_BACKEND__HTTP__MODEL", "m1"),
                ("TWP_TRANSLATE__TARGETS", r#"["fr"]"#),
                ("HOME", "/root"),
            ]),
        )
        .unwrap();
        assert_eq!(c.chunking.limit, 200);
        assert_eq!(c.seed, 7);
        assert_eq!(c.backend.http.model, "m1");
        assert_eq!(c.translate.targets, [Lang::Fr]);
    }

    #[test]
    fn type_errors_name_the_field() {
        let e = PipelineConfig::from_toml("[chunking]\nlimit = \"big\"\n", env(&[])).unwrap_err();
        assert_eq!(e.issues[0].field, "chunking.limit");
        let e = PipelineConfig::from_toml("[dedup]\nbogus = 1\n", env(&[])).unwrap_err();
        assert!(e.issues[0].message.contains("bogus"), "{e}");
    }

    #[test]
    fn validation_collects_every_issue() {
        let e = PipelineConfig::from_toml(
            "[chunking]\nlimit = 0\n[dedup]\nbands = 10\n[pack]\nseq_len = 1\n[prompt]\ninstruction = \"no slot\"\n",
            env(&[]),
        )
        .unwrap_err();
        let fields: Vec<&str> = e.issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["chunking.limit", "prompt", "dedup", "pack.seq_len"]);
    }

    #[test]
    fn snapshot_round_trips_with_seeds_filled() {
        let c = PipelineConfig::from_toml("seed = 3\n[backend]\nkind = \"echo\"\n", env(&[])).unwrap();
        let snap = c.snapshot();
        let back = PipelineConfig::from_toml(&snap, env(&[])).unwrap();
        assert_eq!(back, c.resolved());
        assert_eq!(back.dedup.seed, Some(sub_seed(3, "dedup")));
        assert_eq!(back.snapshot(), snap);
    }
}
