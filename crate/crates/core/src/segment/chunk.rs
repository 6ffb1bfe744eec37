use serde::{Deserialize, Serialize};

use super::{Segmenter, Sentence};
use crate::corpus::TokenCounter;
use crate::lang::Lang;

pub const DEFAULT_CHUNK_LIMIT: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    /// Token budget per chunk. A single sentence above it becomes its own chunk.
    pub limit: usize,
    /// Start a new chunk at every blank line, even with budget left.
    pub paragraph_breaks: bool,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self { limit: DEFAULT_CHUNK_LIMIT, paragraph_breaks: true }
    }
}

/// A run of consecutive sentences from one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk<'a> {
    pub index: usize,
    pub sentences: Vec<Sentence<'a>>,
    /// Sum of the sentences' individual token counts.
    pub token_count: usize,
    /// Source slice from the first sentence start to the last sentence end.
    pub text: &'a str,
}

impl Chunk<'_> {
    pub fn is_oversized(&self, limit: usize) -> bool {
        self.token_count > limit
    }
}

pub struct Chunker<'s> {
    segmenter: &'s Segmenter,
    counter: &'s TokenCounter,
    config: ChunkConfig,
}

impl<'s> Chunker<'s> {
    pub fn new(segmenter: &'s Segmenter, counter: &'s TokenCounter, config: ChunkConfig) -> Self {
        assert!(config.limit >= 1, "chunk limit must be at least 1");
        Self { segmenter, counter, config }
    }

    pub fn config(&self) -> ChunkConfig {
        self.config
    }

    pub fn chunk<'a>(&self, text: &'a str, lang: Lang) -> Vec<Chunk<'a>> {
        let sentences = self.segmenter.split(text, lang);
        let counts: Vec<usize> = sentences.iter().map(|s| self.counter.count(s.text)).collect();
        let breaks: Vec<bool> = if self.config.paragraph_breaks {
            sentences.windows(2).map(|w| text[w[0].span.end..w[1].span.start].matches('\n').count() >= 2).collect()
        } else {
            vec![false; sentences.len().saturating_sub(1)]
        };
        greedy(text, sentences, &counts, &breaks, self.config.limit)
    }
}

/// Greedy packing: append while the running total stays within `limit`.
/// `breaks[i]` forces a boundary between sentence `i` and `i + 1`.
fn greedy<'a>(
    text: &'a str,
    sentences: Vec<Sentence<'a>>,
    counts: &[usize],
    breaks: &[bool],
    limit: usize,
) -> Vec<Chunk<'a>> {
    let mut chunks: Vec<Chunk<'a>> = Vec::new();
    let mut cur: Vec<Sentence<'a>> = Vec::new();
    let mut tokens = 0;
    let flush = |cur: &mut Vec<Sentence<'a>>, tokens: &mut usize, chunks: &mut Vec<Chunk<'a>>| {
        if cur.is_empty() {
            return;
        }
        let span = cur[0].span.start..cur[cur.len() - 1].span.end;
        chunks.push(Chunk {
            index: chunks.len(),
            sentences: std::mem::take(cur),
            token_count: std::mem::take(tokens),
            text: &text[span],
        });
    };
    for (i, s) in sentences.into_iter().enumerate() {
        let forced = i > 0 && breaks[i - 1];
        if !cur.is_empty() && (forced || tokens + counts[i] > limit) {
            flush(&mut cur, &mut tokens, &mut chunks);
        }
        tokens += counts[i];
        cur.push(s);
    }
    flush(&mut cur, &mut tokens, &mut chunks);
    chunks
}
