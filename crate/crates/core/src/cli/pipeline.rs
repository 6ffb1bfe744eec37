//! Single-stage runners and the resumable filter → dedup → translate → mix
//! → pack chain.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ConfigError, PipelineConfig, PIPELINE_SOURCE_PREFIX, SNAPSHOT_FILE};
use crate::corpus::jsonl::{append_json_line, read_all, write_all};
use crate::corpus::{CorpusError, Document, RecordError, TokenCounter};
use crate::dedup::{find_duplicates, write_manifest};
use crate::lang::Lang;
use crate::mixer::{compose, compose_stage, CompositionManifest, LoadedSource, MixError};
use crate::pack::{pack_stream, PackManifest};
use crate::quality::{filter_corpus, FilterSummary, QualityFilter, RuleId};
use crate::seeds::sub_seed;
use crate::segment::Segmenter;
use crate::translate::{
    output_path, translate_corpus, CompletionBackend, CorpusRunOptions, CorpusRunSummary, RunMode, TranslateError,
    Translator,
};

pub const DONE_MARKER: &str = "DONE";
pub const FAILED_MARKER: &str = "FAILED";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const KEPT_FILE: &str = "kept.jsonl";
pub const REJECTED_FILE: &str = "rejected.jsonl";
pub const DEDUP_MANIFEST_FILE: &str = "manifest.jsonl";
pub const MIXED_FILE: &str = "mixed.jsonl";
pub const PACKED_FILE: &str = "packed.bin";
pub const PIPELINE_FILE: &str = "pipeline.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Filter,
    Dedup,
    Translate,
    Mix,
    Pack,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Filter, Stage::Dedup, Stage::Translate, Stage::Mix, Stage::Pack];

    pub fn dir_name(self) -> &'static str {
        match self {
            Stage::Filter => "01-filter",
            Stage::Dedup => "02-dedup",
            Stage::Translate => "03-translate",
            Stage::Mix => "04-mix",
            Stage::Pack => "05-pack",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Filter(#[from] crate::quality::FilterError),
    #[error(transparent)]
    Quality(#[from] crate::quality::QualityError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Pack(#[from] crate::pack::PackError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io { path: path.to_path_buf(), source }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), StageError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(io_at(path))
}

fn read_corpus(path: &Path, strict: bool) -> Result<(Vec<Document>, Vec<RecordError>), StageError> {
    Ok(read_all(path, strict)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterManifest {
    pub documents_in: u64,
    pub kept: u64,
    pub rejected: u64,
    pub first_failures: BTreeMap<RuleId, u64>,
    pub active_rules: Vec<RuleId>,
    pub input_errors: Vec<RecordError>,
}

/// Quality-filters `input` into `dir/kept.jsonl` and `dir/rejected.jsonl`.
pub fn run_filter(cfg: &PipelineConfig, input: &Path, dir: &Path) -> Result<FilterManifest, StageError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let filter = QualityFilter::new(cfg.quality.clone())?;
    let (docs, input_errors) = read_corpus(input, cfg.strict)?;
    let documents_in = docs.len() as u64;
    let kept_path = dir.join(KEPT_FILE);
    let rej_path = dir.join(REJECTED_FILE);
    let mut kept = BufWriter::new(File::create(&kept_path).map_err(io_at(&kept_path))?);
    let mut rejected = BufWriter::new(File::create(&rej_path).map_err(io_at(&rej_path))?);
    let FilterSummary { kept: n_kept, rejected: n_rejected, first_failures, active_rules } = filter_corpus(
        docs,
        &filter,
        |d| append_json_line(&mut kept, &d).map(drop),
        |r| append_json_line(&mut rejected, &r).map(drop),
    )?;
    kept.flush().map_err(io_at(&kept_path))?;
    rejected.flush().map_err(io_at(&rej_path))?;
    let manifest =
        FilterManifest { documents_in, kept: n_kept, rejected: n_rejected, first_failures, active_rules, input_errors };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupSummary {
    pub documents_in: u64,
    pub kept: u64,
    pub removed: u64,
    pub clusters: u64,
    pub candidate_pairs: u64,
    pub unsignable: u64,
}

/// Near-duplicate removal into `dir/kept.jsonl` plus the cluster manifest.
pub fn run_dedup(cfg: &PipelineConfig, input: &Path, dir: &Path) -> Result<DedupSummary, StageError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let params = cfg.dedup_params();
    let (docs, errors) = read_corpus(input, cfg.strict)?;
    for e in &errors {
        log::warn!("{}: {e}", input.display());
    }
    let outcome = find_duplicates(&docs, &params);
    let documents_in = docs.len() as u64;
    let kept: Vec<&Document> = docs.iter().filter(|d| !outcome.removed.contains(&d.id)).collect();
    let kept_path = dir.join(KEPT_FILE);
    write_all(&kept_path, kept.iter().copied())?;
    let man_path = dir.join(DEDUP_MANIFEST_FILE);
    let mut out = BufWriter::new(File::create(&man_path).map_err(io_at(&man_path))?);
    write_manifest(&mut out, &params, &outcome, documents_in).map_err(io_at(&man_path))?;
    Ok(DedupSummary {
        documents_in,
        kept: kept.len() as u64,
        removed: outcome.removed.len() as u64,
        clusters: outcome.clusters.len() as u64,
        candidate_pairs: outcome.candidate_pairs as u64,
        unsignable: outcome.unsignable.len() as u64,
    })
}

/// Everything a translation run needs besides the config.
pub struct TranslateDeps<'a> {
    pub backend: &'a dyn CompletionBackend,
    pub counter: &'a TokenCounter,
    pub segmenter: &'a Segmenter,
}

pub fn run_translate(
    cfg: &PipelineConfig,
    deps: &TranslateDeps<'_>,
    input: &Path,
    dir: &Path,
    mode: RunMode,
    stop_after_pairs: Option<usize>,
) -> Result<CorpusRunSummary, StageError> {
    let translator = Translator {
        backend: deps.backend,
        template: &cfg.prompt,
        segmenter: deps.segmenter,
        counter: deps.counter,
        chunking: cfg.chunking,
        params: cfg.generation_params(),
        retry: cfg.backend.retry,
        max_in_flight: cfg.backend.max_in_flight,
    };
    let opts = CorpusRunOptions {
        targets: cfg.translate.targets.clone(),
        mode,
        window: cfg.translate.window,
        strict: cfg.strict,
        stop_after_pairs,
    };
    Ok(translate_corpus(input, dir, &translator, &opts)?)
}

fn write_mixed(dir: &Path, docs: &[Document], manifest: &CompositionManifest) -> Result<(), StageError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let path = dir.join(MIXED_FILE);
    write_all(&path, docs)?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Composes the configured mixture `stage` into `dir/mixed.jsonl`.
pub fn run_mix(
    cfg: &PipelineConfig,
    counter: &TokenCounter,
    stage: &str,
    dir: &Path,
) -> Result<CompositionManifest, StageError> {
    let spec = cfg
        .mix
        .stages
        .iter()
        .find(|s| s.stage == stage)
        .ok_or_else(|| StageError::Other(format!("no mixture stage named `{stage}`")))?;
    if spec.sources.iter().any(|s| is_pipeline_ref(&s.path)) {
        return Err(StageError::Other(format!(
            "stage `{stage}` reads `{PIPELINE_SOURCE_PREFIX}` sources and only runs inside `pipeline`"
        )));
    }
    let (docs, manifest) = compose_stage(spec, counter, cfg.seed, cfg.strict)?;
    write_mixed(dir, &docs, &manifest)?;
    Ok(manifest)
}

fn is_pipeline_ref(p: &Path) -> bool {
    p.to_str().is_some_and(|s| s.starts_with(PIPELINE_SOURCE_PREFIX))
}

/// Mixes the per-language pool built by earlier pipeline stages.
fn run_pipeline_mix(
    cfg: &PipelineConfig,
    counter: &TokenCounter,
    mut pool: BTreeMap<Lang, Vec<Document>>,
    dir: &Path,
) -> Result<CompositionManifest, StageError> {
    let (stage, seed, buffer, sources, budgets) = match &cfg.mix.pipeline_stage {
        None => {
            let sources: Vec<LoadedSource> = pool
                .into_iter()
                .filter(|(_, docs)| !docs.is_empty())
                .map(|(lang, docs)| {
                    let mut s = LoadedSource::from_docs(lang.code(), docs, counter);
                    s.path = PathBuf::from(format!("{PIPELINE_SOURCE_PREFIX}{}", lang.code()));
                    s
                })
                .collect();
            let budget = sources.iter().map(LoadedSource::available).min().unwrap_or(0);
            let budgets = vec![budget; sources.len()];
            ("pipeline".to_string(), sub_seed(cfg.seed, "mix/pipeline"), cfg.mix.shuffle_buffer, sources, budgets)
        }
        Some(name) => {
            let spec = cfg.mix.stages.iter().find(|s| &s.stage == name).expect("validated");
            let budgets = spec.budgets()?;
            let mut sources = Vec::new();
            let mut errors = Vec::new();
            for s in &spec.sources {
                let src = if is_pipeline_ref(&s.path) {
                    let code = &s.path.to_str().unwrap()[PIPELINE_SOURCE_PREFIX.len()..];
                    let lang: Lang = code
                        .parse()
                        .map_err(|_| StageError::Other(format!("source `{}`: unknown language `{code}`", s.name)))?;
                    let mut src = LoadedSource::from_docs(&s.name, pool.remove(&lang).unwrap_or_default(), counter);
                    src.path = s.path.clone();
                    src
                } else {
                    LoadedSource::load(&s.name, &s.path, counter, cfg.strict, &mut errors)?
                };
                sources.push(src);
            }
            let seed = spec.seed.unwrap_or_else(|| sub_seed(cfg.seed, &format!("mix/{name}")));
            (name.clone(), seed, spec.shuffle_buffer, sources, budgets)
        }
    };
    if sources.is_empty() {
        return Err(StageError::Other("nothing to mix: every earlier stage produced no documents".into()));
    }
    let (docs, reports) = compose(&stage, sources, &budgets, seed, buffer)?;
    let manifest = CompositionManifest {
        stage,
        seed,
        shuffle_buffer: buffer,
        tokenizer_fingerprint: counter.fingerprint().to_string(),
        total_tokens: reports.iter().map(|r| r.realized_tokens).sum(),
        total_documents: docs.len() as u64,
        sources: reports,
        input_errors: Vec::new(),
    };
    write_mixed(dir, &docs, &manifest)?;
    Ok(manifest)
}

/// Packs `input` into `dir/packed.bin` with its manifest alongside.
pub fn run_pack(
    cfg: &PipelineConfig,
    counter: &TokenCounter,
    input: &Path,
    dir: &Path,
) -> Result<PackManifest, StageError> {
    fs::create_dir_all(dir).map_err(io_at(dir))?;
    let (docs, errors) = read_corpus(input, cfg.strict)?;
    for e in &errors {
        log::warn!("{}: {e}", input.display());
    }
    let manifest = pack_stream(docs, counter, cfg.pack.seq_len, &dir.join(PACKED_FILE))?;
    if !manifest.identity_holds() {
        return Err(StageError::Other(format!("token conservation violated: {manifest:?}")));
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Where a simulated crash should happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopPoint {
    /// Right after the stage has been marked done.
    AfterStage(Stage),
    /// After this many (document, target) pairs have been journaled.
    TranslatePairs(usize),
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    pub mode: RunMode,
    pub stop: Option<StopPoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0} already holds a pipeline run; pass --resume or --restart")]
    ExistingRun(PathBuf),
    #[error("configuration differs from the snapshot in {0}; pass --restart to start over")]
    ConfigChanged(PathBuf),
    #[error("stage {stage:?} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
    #[error("interrupted during stage {0:?}")]
    Interrupted(Stage),
}

impl PipelineError {
    /// 2 for usage and configuration problems, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::ExistingRun(_) | PipelineError::ConfigChanged(_) => 2,
            PipelineError::Stage { .. } | PipelineError::Interrupted(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub filter: FilterManifest,
    pub dedup: DedupSummary,
    pub translate: Option<crate::translate::TranslationManifest>,
    pub mix: CompositionManifest,
    pub pack: PackManifest,
    /// Stages reused from a previous invocation.
    #[serde(skip)]
    pub skipped: Vec<Stage>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|e| StageError::Other(format!("{}: {e}", path.display())))
}

fn clear_dir(dir: &Path) -> Result<(), StageError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_at(dir))?;
    }
    fs::create_dir_all(dir).map_err(io_at(dir))
}

struct Runner<'a> {
    out: &'a Path,
    snapshot: String,
    resume: bool,
    stop: Option<StopPoint>,
    skipped: Vec<Stage>,
}

impl Runner<'_> {
    fn dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.dir_name())
    }

    /// Runs `f` for `stage` unless a previous invocation finished it, in
    /// which case `load` recovers its result.
    fn stage<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce(&Path) -> Result<T, StageError>,
        load: impl FnOnce(&Path) -> Result<T, StageError>,
    ) -> Result<T, PipelineError> {
        let dir = self.dir(stage);
        let wrap = |source| PipelineError::Stage { stage, source };
        if self.resume && dir.join(DONE_MARKER).exists() {
            self.skipped.push(stage);
            return load(&dir).map_err(wrap);
        }
        // translation keeps its journal across invocations
        if stage != Stage::Translate || !self.resume {
            clear_dir(&dir).map_err(wrap)?;
        }
        fs::create_dir_all(&dir).map_err(|e| wrap(io_at(&dir)(e)))?;
        let _ = fs::remove_file(dir.join(FAILED_MARKER));
        fs::write(dir.join(SNAPSHOT_FILE), &self.snapshot).map_err(|e| wrap(io_at(&dir)(e)))?;
        match f(&dir) {
            Ok(v) => {
                fs::write(dir.join(DONE_MARKER), "").map_err(|e| wrap(io_at(&dir)(e)))?;
                if self.stop == Some(StopPoint::AfterStage(stage)) {
                    return Err(PipelineError::Interrupted(stage));
                }
                Ok(v)
            }
            Err(StageError::Translate(TranslateError::Interrupted(_))) => Err(PipelineError::Interrupted(stage)),
            Err(e) => {
                let _ = fs::write(dir.join(FAILED_MARKER), format!("{e}\n"));
                Err(wrap(e))
            }
        }
    }
}

/// Runs filter → dedup → translate (when enabled) → mix → pack over
/// `input`, one artifact directory per stage under `out`.
///
/// With [`RunMode::Resume`], stages already marked done are reused and an
/// interrupted translation continues from its journal; the final output is
/// identical to an uninterrupted run.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    backend: &dyn CompletionBackend,
    input: &Path,
    out: &Path,
    opts: &PipelineOptions,
) -> Result<PipelineReport, PipelineError> {
    cfg.validate()?;
    let counter = cfg.token_counter()?;
    let segmenter = cfg.segmenter()?;
    let snapshot = cfg.snapshot();
    let root_snapshot = out.join(SNAPSHOT_FILE);
    let started = root_snapshot.exists() || Stage::ALL.iter().any(|s| out.join(s.dir_name()).exists());
    let io_fail = |e: std::io::Error| PipelineError::Stage { stage: Stage::Filter, source: io_at(out)(e) };
    match opts.mode {
        RunMode::Fresh if started => return Err(PipelineError::ExistingRun(out.to_path_buf())),
        RunMode::Resume if started => {
            let previous = fs::read_to_string(&root_snapshot).unwrap_or_default();
            if previous != snapshot {
                return Err(PipelineError::ConfigChanged(out.to_path_buf()));
            }
        }
        RunMode::Restart => {
            for s in Stage::ALL {
                let d = out.join(s.dir_name());
                if d.exists() {
                    fs::remove_dir_all(&d).map_err(io_fail)?;
                }
            }
            for f in [SNAPSHOT_FILE, PIPELINE_FILE, FAILED_MARKER] {
                let _ = fs::remove_file(out.join(f));
            }
        }
        _ => {}
    }
    fs::create_dir_all(out).map_err(io_fail)?;
    // write-then-rename so a crash never leaves a torn snapshot behind
    let tmp = out.join(format!("{SNAPSHOT_FILE}.tmp"));
    fs::write(&tmp, &snapshot).map_err(io_fail)?;
    fs::rename(&tmp, &root_snapshot).map_err(io_fail)?;

    let mut r = Runner { out, snapshot, resume: opts.mode == RunMode::Resume, stop: opts.stop, skipped: Vec::new() };

    let filter = r.stage(Stage::Filter, |d| run_filter(cfg, input, d), |d| read_json(&d.join(MANIFEST_FILE)))?;
    let filtered = r.dir(Stage::Filter).join(KEPT_FILE);
    let dedup = r.stage(
        Stage::Dedup,
        |d| {
            let s = run_dedup(cfg, &filtered, d)?;
            write_json(&d.join(MANIFEST_FILE), &s)?;
            Ok(s)
        },
        |d| read_json(&d.join(MANIFEST_FILE)),
    )?;
    let deduped = r.dir(Stage::Dedup).join(KEPT_FILE);

    let translate = if cfg.translate.enabled {
        let deps = TranslateDeps { backend, counter: &counter, segmenter: &segmenter };
        let mode = if r.resume { RunMode::Resume } else { RunMode::Fresh };
        let stop = match opts.stop {
            Some(StopPoint::TranslatePairs(n)) => Some(n),
            _ => None,
        };
        Some(r.stage(
            Stage::Translate,
            |d| Ok(run_translate(cfg, &deps, &deduped, d, mode, stop)?.manifest),
            |d| read_json(&d.join(MANIFEST_FILE)),
        )?)
    } else {
        None
    };

    let translated_dir = r.dir(Stage::Translate);
    let mix = r.stage(
        Stage::Mix,
        |d| {
            let mut pool: BTreeMap<Lang, Vec<Document>> = BTreeMap::new();
            for doc in read_corpus(&deduped, true)?.0 {
                pool.entry(doc.lang).or_default().push(doc);
            }
            if cfg.translate.enabled {
                for &t in &cfg.translate.targets {
                    pool.entry(t).or_default().extend(read_corpus(&output_path(&translated_dir, t), true)?.0);
                }
            }
            run_pipeline_mix(cfg, &counter, pool, d)
        },
        |d| read_json(&d.join(MANIFEST_FILE)),
    )?;
    let mixed = r.dir(Stage::Mix).join(MIXED_FILE);
    let pack = r.stage(Stage::Pack, |d| run_pack(cfg, &counter, &mixed, d), |d| read_json(&d.join(MANIFEST_FILE)))?;

    let report = PipelineReport { filter, dedup, translate, mix, pack, skipped: r.skipped };
    write_json(&out.join(PIPELINE_FILE), &report)
        .map_err(|source| PipelineError::Stage { stage: Stage::Pack, source })?;
    Ok(report)
}
