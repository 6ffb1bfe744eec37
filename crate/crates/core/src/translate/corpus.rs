//! Resumable corpus translation.
//!
//! Layout of the output directory:
//!
//! ```text
//! <tgt>.jsonl      translated documents, input order
//! failures.jsonl   chunk records with status failed/empty
//! journal.jsonl    one line per finished (doc, target) pair
//! manifest.json    counts aggregated from the journal (deterministic)
//! timing.json      throughput of the last invocation
//! ```
//!
//! Each pair is written as: output line, failure lines, flush, journal line,
//! flush. The journal records the byte length of the output and failure
//! files after the pair, so a resumed run truncates both back to the last
//! journaled pair and continues. Because documents are visited in input
//! order, the final files do not depend on where a run was interrupted.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::document::{ChunkStatus, DocumentTranslation, Translator};
use super::prompt::TemplateError;
use crate::corpus::jsonl::append_json_line;
use crate::corpus::{CorpusError, CorpusReader, Document, RecordError};
use crate::lang::Lang;

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{path}: journal line {line} is corrupt ({message}); rerun with --restart")]
    JournalCorrupt { path: PathBuf, line: usize, message: String },
    #[error("{path}: journal was written for a different run ({message}); rerun with --restart")]
    JournalMismatch { path: PathBuf, message: String },
    #[error("{0}: previous run found; pass --resume to continue or --restart to discard it")]
    ExistingRun(PathBuf),
    #[error("stopped after {0} pairs")]
    Interrupted(usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TranslateError + '_ {
    move |source| TranslateError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Refuse to touch an existing journal.
    #[default]
    Fresh,
    /// Continue from the journal if there is one.
    Resume,
    /// Discard previous outputs and start over.
    Restart,
}

#[derive(Debug, Clone)]
pub struct CorpusRunOptions {
    pub targets: Vec<Lang>,
    pub mode: RunMode,
    /// Documents per scheduling window.
    pub window: usize,
    /// Abort on the first malformed input line.
    pub strict: bool,
    /// Return [`TranslateError::Interrupted`] after this many pairs have been
    /// journaled in this invocation. Simulates a crash.
    pub stop_after_pairs: Option<usize>,
}

impl Default for CorpusRunOptions {
    fn default() -> Self {
        Self {
            targets: vec![Lang::Fr, Lang::De, Lang::Es],
            mode: RunMode::Fresh,
            window: 64,
            strict: false,
            stop_after_pairs: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Ok,
    Failed,
    /// Document already in the target language.
    SameLanguage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JournalHeader {
    #[serde(rename = "_journal")]
    version: u32,
    targets: Vec<Lang>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct JournalEntry {
    doc_id: String,
    target: Lang,
    status: PairStatus,
    chunks: usize,
    empty_chunks: usize,
    dropped_sentences: usize,
    out_end: u64,
    fail_end: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCounts {
    pub ok: u64,
    pub failed: u64,
    pub same_language: u64,
    pub chunks: u64,
    pub empty_chunks: u64,
    pub dropped_sentences: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationManifest {
    pub documents_in: u64,
    pub targets: BTreeMap<Lang, TargetCounts>,
    pub ok: u64,
    pub failed: u64,
    pub input_errors: Vec<RecordError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_secs: f64,
    pub pairs: u64,
    pub chunks: u64,
    pub pairs_per_sec: f64,
    pub chunks_per_sec: f64,
}

#[derive(Debug, Clone)]
pub struct CorpusRunSummary {
    pub manifest: TranslationManifest,
    pub timing: Timing,
    pub resumed_pairs: usize,
}

pub fn output_path(out_dir: &Path, tgt: Lang) -> PathBuf {
    out_dir.join(format!("{}.jsonl", tgt.code()))
}

struct Outputs {
    targets: BTreeMap<Lang, (PathBuf, BufWriter<File>, u64)>,
    failures: (PathBuf, BufWriter<File>, u64),
    journal: (PathBuf, BufWriter<File>),
}

fn open_truncated(path: &Path, len: u64) -> Result<(BufWriter<File>, u64), TranslateError> {
    let f = OpenOptions::new().create(true).truncate(false).write(true).open(path).map_err(io_err(path))?;
    f.set_len(len).map_err(io_err(path))?;
    let mut f = f;
    use std::io::{Seek, SeekFrom};
    f.seek(SeekFrom::Start(len)).map_err(io_err(path))?;
    Ok((BufWriter::new(f), len))
}

/// Reads a journal, tolerating a torn final line.
fn load_journal(path: &Path) -> Result<Option<(JournalHeader, Vec<JournalEntry>, u64)>, TranslateError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(io_err(path)(e)),
    };
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if complete == 0 {
        return Ok(None);
    }
    let corrupt =
        |line: usize, message: String| TranslateError::JournalCorrupt { path: path.to_path_buf(), line, message };
    let mut lines = bytes[..complete].split(|&b| b == b'\n').filter(|l| !l.is_empty());
    let header: JournalHeader =
        serde_json::from_slice(lines.next().unwrap_or_default()).map_err(|e| corrupt(1, e.to_string()))?;
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate() {
        entries.push(serde_json::from_slice(line).map_err(|e| corrupt(i + 2, e.to_string()))?);
    }
    Ok(Some((header, entries, complete as u64)))
}

fn remove_if_exists(path: &Path) -> Result<(), TranslateError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

fn prepare(out_dir: &Path, opts: &CorpusRunOptions) -> Result<(Outputs, Vec<JournalEntry>), TranslateError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let journal_path = out_dir.join(JOURNAL_FILE);
    let header = JournalHeader { version: 1, targets: opts.targets.clone() };
    if opts.mode == RunMode::Restart {
        remove_if_exists(&journal_path)?;
    }
    let loaded = load_journal(&journal_path)?;
    let (entries, journal_len) = match loaded {
        Some(_) if opts.mode == RunMode::Fresh => return Err(TranslateError::ExistingRun(journal_path)),
        Some((h, _, _)) if h != header => {
            return Err(TranslateError::JournalMismatch {
                path: journal_path,
                message: format!("targets {:?} vs {:?}", h.targets, header.targets),
            })
        }
        Some((_, entries, len)) => (entries, len),
        None => (Vec::new(), 0),
    };

    let mut targets = BTreeMap::new();
    for &t in &opts.targets {
        let end = entries.iter().rev().find(|e| e.target == t).map_or(0, |e| e.out_end);
        let path = output_path(out_dir, t);
        let (w, len) = open_truncated(&path, end)?;
        targets.insert(t, (path, w, len));
    }
    let fail_path = out_dir.join(FAILURES_FILE);
    let (fw, flen) = open_truncated(&fail_path, entries.last().map_or(0, |e| e.fail_end))?;
    let (mut jw, _) = open_truncated(&journal_path, journal_len)?;
    if journal_len == 0 {
        append_json_line(&mut jw, &header).map_err(io_err(&journal_path))?;
        jw.flush().map_err(io_err(&journal_path))?;
    }
    Ok((Outputs { targets, failures: (fail_path, fw, flen), journal: (journal_path, jw) }, entries))
}

impl Outputs {
    fn record(
        &mut self,
        doc: &Document,
        tgt: Lang,
        result: Option<&DocumentTranslation>,
    ) -> Result<JournalEntry, TranslateError> {
        let (out_path, out, out_len) = self.targets.get_mut(&tgt).expect("target opened");
        let (fail_path, fail, fail_len) = &mut self.failures;
        let mut entry = JournalEntry {
            doc_id: doc.id.clone(),
            target: tgt,
            status: PairStatus::SameLanguage,
            chunks: 0,
            empty_chunks: 0,
            dropped_sentences: 0,
            out_end: 0,
            fail_end: 0,
        };
        if let Some(t) = result {
            entry.chunks = t.records.len();
            entry.empty_chunks = t.records.iter().filter(|r| r.status == ChunkStatus::Empty).count();
            entry.dropped_sentences = t.dropped_sentences();
            if let Some(d) = &t.document {
                entry.status = PairStatus::Ok;
                *out_len += append_json_line(out, d).map_err(io_err(out_path))?;
            } else {
                entry.status = PairStatus::Failed;
            }
            for r in t.records.iter().filter(|r| r.status != ChunkStatus::Ok) {
                *fail_len += append_json_line(fail, r).map_err(io_err(fail_path))?;
            }
        }
        out.flush().map_err(io_err(out_path))?;
        fail.flush().map_err(io_err(fail_path))?;
        entry.out_end = *out_len;
        entry.fail_end = *fail_len;
        let (jp, jw) = &mut self.journal;
        append_json_line(jw, &entry).map_err(io_err(jp))?;
        jw.flush().map_err(io_err(jp))?;
        Ok(entry)
    }
}

fn manifest_from(entries: &[JournalEntry], documents_in: u64, input_errors: Vec<RecordError>) -> TranslationManifest {
    let mut m = TranslationManifest { documents_in, input_errors, ..Default::default() };
    for e in entries {
        let c = m.targets.entry(e.target).or_default();
        match e.status {
            PairStatus::Ok => c.ok += 1,
            PairStatus::Failed => c.failed += 1,
            PairStatus::SameLanguage => c.same_language += 1,
        }
        c.chunks += e.chunks as u64;
        c.empty_chunks += e.empty_chunks as u64;
        c.dropped_sentences += e.dropped_sentences as u64;
    }
    m.ok = m.targets.values().map(|c| c.ok).sum();
    m.failed = m.targets.values().map(|c| c.failed).sum();
    m
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), TranslateError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Translates every document of `input` into every target.
pub fn translate_corpus(
    input: &Path,
    out_dir: &Path,
    translator: &Translator<'_>,
    opts: &CorpusRunOptions,
) -> Result<CorpusRunSummary, TranslateError> {
    let started = Instant::now();
    let (mut outputs, mut entries) = prepare(out_dir, opts)?;
    let resumed_pairs = entries.len();
    let done: HashSet<(String, Lang)> = entries.iter().map(|e| (e.doc_id.clone(), e.target)).collect();

    let mut input_errors = Vec::new();
    let mut reader = CorpusReader::open(input)?;
    let mut documents_in = 0u64;
    let (mut pairs, mut chunks) = (0usize, 0u64);
    let window = opts.window.max(1);

    loop {
        let mut docs = Vec::with_capacity(window);
        for item in reader.by_ref() {
            match item {
                Ok(d) => docs.push(d),
                Err(e) if opts.strict => {
                    return Err(CorpusError::Malformed { path: input.to_path_buf(), source: e }.into())
                }
                Err(e) => {
                    log::warn!("{}: {e}", input.display());
                    input_errors.push(e);
                }
            }
            if docs.len() == window {
                break;
            }
        }
        if docs.is_empty() {
            break;
        }
        documents_in += docs.len() as u64;
        for &tgt in &opts.targets {
            let todo: Vec<&Document> = docs.iter().filter(|d| !done.contains(&(d.id.clone(), tgt))).collect();
            let to_translate: Vec<Document> = todo.iter().filter(|d| d.lang != tgt).map(|d| (*d).clone()).collect();
            let mut results = translator.translate_batch(&to_translate, tgt)?.into_iter();
            for doc in todo {
                let result = (doc.lang != tgt).then(|| results.next().expect("one result per doc"));
                let entry = outputs.record(doc, tgt, result.as_ref())?;
                chunks += entry.chunks as u64;
                entries.push(entry);
                pairs += 1;
                if opts.stop_after_pairs == Some(pairs) {
                    return Err(TranslateError::Interrupted(pairs));
                }
            }
        }
    }

    let manifest = manifest_from(&entries, documents_in, input_errors);
    let elapsed = started.elapsed().as_secs_f64();
    let timing = Timing {
        elapsed_secs: elapsed,
        pairs: pairs as u64,
        chunks,
        pairs_per_sec: pairs as f64 / elapsed.max(1e-9),
        chunks_per_sec: chunks as f64 / elapsed.max(1e-9),
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    write_json(&out_dir.join(TIMING_FILE), &timing)?;
    log::info!(
        "translated {} pairs ({} resumed), {} failed, {:.1} pairs/s",
        pairs,
        resumed_pairs,
        manifest.failed,
        timing.pairs_per_sec
    );
    Ok(CorpusRunSummary { manifest, timing, resumed_pairs })
}
