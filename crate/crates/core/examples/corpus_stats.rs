//! Write a small multilingual JSONL corpus, read it back leniently and
//! report per-language token statistics with the bundled BPE tokenizer.
//!
//! ```bash
//! cargo run -p twp --example corpus_stats
//! ```

use twp::corpus::jsonl::{read_all, write_all};
use twp::corpus::stats::implied_doc_count;
use twp::corpus::{compute_stats, CorpusReader, RecordError};
use twp::{Document, Lang, TokenCounter};

const SEEDS: [(Lang, &str); 4] = [
    (Lang::En, include_str!("../data/seeds/en.txt")),
    (Lang::Fr, include_str!("../data/seeds/fr.txt")),
    (Lang::De, include_str!("../data/seeds/de.txt")),
    (Lang::Es, include_str!("../data/seeds/es.txt")),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("corpus.jsonl");

    // five-line documents cut from the seed text of each language
    let docs: Vec<Document> = SEEDS
        .iter()
        .flat_map(|(lang, text)| {
            let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            lines
                .chunks(5)
                .take(40)
                .enumerate()
                .map(|(i, c)| Document::new(format!("{lang}-{i:03}"), *lang, c.join(" ")))
                .collect::<Vec<_>>()
        })
        .collect();
    write_all(&path, &docs)?;

    // a malformed line is skipped and reported, not fatal
    let mut bytes = std::fs::read(&path)?;
    bytes.extend_from_slice(b"{\"id\": \"broken\", \"lang\": \"en\"\n");
    std::fs::write(&path, bytes)?;
    let (read, errors) = read_all(&path, false)?;
    for e in &errors {
        println!("skipped {e}");
    }

    let counter = TokenCounter::bundled_bpe();
    let stats = compute_stats(read, &counter);
    println!("tokenizer {}", stats.tokenizer_fingerprint);
    println!("{:<6} {:>10} {:>6} {:>9}", "lang", "tokens", "docs", "avg");
    for (lang, s) in &stats.languages {
        println!("{:<6} {:>10} {:>6} {:>9.1}", lang.code(), s.token_total, s.doc_count, s.avg_doc_length);
    }
    let t = &stats.total;
    println!("{:<6} {:>10} {:>6} {:>9.1}", "total", t.token_total, t.doc_count, t.avg_doc_length);

    // the identity runs both ways: totals and averages imply a count
    let implied = implied_doc_count(t.token_total as f64, t.avg_doc_length);
    println!("implied documents from total/avg: {implied:.1}");

    // streaming access with per-line error collection
    let mut errs: Vec<RecordError> = Vec::new();
    let first = CorpusReader::open(&path)?.lenient(&mut errs).next().map(|d| d.id);
    println!("first document: {first:?}");
    Ok(())
}
