//! Documents, JSONL streaming, token counting and corpus statistics.

mod document;
pub mod jsonl;
pub mod stats;
pub mod tokenizer;

pub use document::Document;
pub use jsonl::{CorpusError, CorpusHeader, CorpusReader, CorpusWriter, RecordError};
pub use stats::{compute_stats, CorpusStats, LangStats};
pub use tokenizer::TokenCounter;
