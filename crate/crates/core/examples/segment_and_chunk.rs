//! Split text into sentences with the rule-based segmenter, then group them
//! into translation chunks under a token budget.
//!
//! ```bash
//! cargo run -p twp --example segment_and_chunk
//! ```

use twp::segment::{ChunkConfig, Chunker, Segmenter};
use twp::{Lang, TokenCounter};

const TEXT: &str = "Dr. Smith arrived at 9 a.m. and met the team. \
The results were clear: growth of 3.5% in Q1! Was it enough? \
Nobody knew…\n\nA new paragraph starts here. It keeps going with a few more words. \
And this final line is cut off mid";

fn main() {
    let segmenter = Segmenter::bundled();
    println!("sentences:");
    for s in segmenter.split(TEXT, Lang::En) {
        let mark = if s.terminal { ' ' } else { '~' };
        println!("  {mark} [{:>3}..{:>3}] {}", s.span.start, s.span.end, s.text);
    }

    let counter = TokenCounter::bundled_bpe();
    for limit in [300, 20] {
        let chunker = Chunker::new(&segmenter, &counter, ChunkConfig { limit, paragraph_breaks: true });
        println!("\nchunks with a {limit}-token limit:");
        for c in chunker.chunk(TEXT, Lang::En) {
            let flag = if c.is_oversized(limit) { " (oversized single sentence)" } else { "" };
            println!("  #{} {} sentences, {} tokens{flag}", c.index, c.sentences.len(), c.token_count);
        }
    }

    let fr = "M. Dupont est arrivé. Il a dit bonjour, etc. et il est reparti.";
    println!("\nfrench abbreviations:");
    for s in segmenter.split(fr, Lang::Fr) {
        println!("  {}", s.text);
    }
}
