//! Sentence segmentation and token-budget chunking.

mod chunk;
mod sentences;

pub use chunk::{Chunk, ChunkConfig, Chunker, DEFAULT_CHUNK_LIMIT};
pub use sentences::{split_sentences, Segmenter, Sentence};
