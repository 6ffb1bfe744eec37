//! Chunked machine translation: prompts, backends, trimming and resumable
//! corpus runs.

pub mod backend;
mod corpus;
mod document;
mod prompt;
mod trim;

pub use backend::{
    BackendError, CipherBackend, CompletionBackend, CompletionRequest, EchoBackend, FnBackend, HttpBackend, HttpConfig,
    RetryPolicy, ScriptedBackend,
};
pub use corpus::{
    output_path, translate_corpus, CorpusRunOptions, CorpusRunSummary, PairStatus, RunMode, TargetCounts, Timing,
    TranslateError, TranslationManifest, FAILURES_FILE, JOURNAL_FILE, MANIFEST_FILE, TIMING_FILE,
};
pub use document::{
    translated_id, ChunkStatus, DocumentTranslation, GenerationParams, TranslationRecord, Translator, CHUNK_JOIN,
    DEFAULT_MAX_IN_FLIGHT,
};
pub use prompt::{PromptTemplate, TemplateError, DEFAULT_INSTRUCTION};
pub use trim::{trim_incomplete, Trimmed};
