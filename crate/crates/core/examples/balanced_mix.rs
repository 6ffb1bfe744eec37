//! Draw equal token budgets from four language corpora of different sizes
//! and interleave them into one shuffled training stream.
//!
//! ```bash
//! cargo run -p twp --example balanced_mix
//! ```

use twp::corpus::jsonl::write_all;
use twp::mixer::{compose_stage, MixtureSource, MixtureSpec};
use twp::{Document, Lang, TokenCounter};

const SEEDS: [(Lang, &str); 4] = [
    (Lang::En, include_str!("../data/seeds/en.txt")),
    (Lang::Fr, include_str!("../data/seeds/fr.txt")),
    (Lang::De, include_str!("../data/seeds/de.txt")),
    (Lang::Es, include_str!("../data/seeds/es.txt")),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut sources = Vec::new();
    for (k, (lang, text)) in SEEDS.iter().enumerate() {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        // deliberately unequal corpora: 2, 3, 4 and 5 sentences per document
        let docs: Vec<Document> = lines
            .chunks(k + 2)
            .enumerate()
            .map(|(i, c)| Document::new(format!("{lang}-{i:04}"), *lang, c.join(" ")))
            .collect();
        let path = dir.path().join(format!("{lang}.jsonl"));
        write_all(&path, &docs)?;
        sources.push(MixtureSource { name: lang.code().into(), path, budget: None, weight: Some(0.25) });
    }

    let spec = MixtureSpec {
        stage: "pretrain".into(),
        total_tokens: Some(24_000),
        seed: Some(7),
        shuffle_buffer: 256,
        sources,
    };
    let counter = TokenCounter::bundled_bpe();
    let (mixed, manifest) = compose_stage(&spec, &counter, 0, true)?;
    println!("{:<4} {:>8} {:>10} {:>9} {:>5}", "src", "budget", "available", "realized", "docs");
    for s in &manifest.sources {
        println!(
            "{:<4} {:>8} {:>10} {:>9} {:>5}",
            s.name, s.budget, s.available_tokens, s.realized_tokens, s.documents
        );
    }
    let head: Vec<&str> = mixed.iter().take(12).map(|d| d.id.as_str()).collect();
    println!("\nfirst documents of the stream: {head:?}");
    Ok(())
}
