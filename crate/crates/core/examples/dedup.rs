//! Find near-duplicate documents with MinHash signatures and LSH banding.
//!
//! ```bash
//! cargo run -p twp --example dedup
//! ```

use twp::dedup::{candidate_probability, dedup_corpus, DedupParams, MinHasher};
use twp::{Document, Lang};

const ES: &str = include_str!("../data/seeds/es.txt");

fn main() {
    let lines: Vec<&str> = ES.lines().filter(|l| !l.trim().is_empty()).collect();
    let base = lines[..10].join(" ");
    let mut docs = vec![
        Document::new("original", Lang::Es, base.clone()),
        // the same text, shouting and with different punctuation
        Document::new("copy-upper", Lang::Es, base.to_uppercase().replace(',', ";")),
        // one sentence swapped at the end
        Document::new("edited", Lang::Es, format!("{} {}", lines[..9].join(" "), lines[40])),
    ];
    for i in 0..5 {
        docs.push(Document::new(format!("other-{i}"), Lang::Es, lines[20 + 10 * i..30 + 10 * i].join(" ")));
    }

    let hasher = MinHasher::new(0, 128, 5);
    let sig = |t: &str| hasher.signature(t).unwrap();
    let (a, b, c) = (sig(&docs[0].text), sig(&docs[1].text), sig(&docs[2].text));
    println!("estimated J(original, copy-upper) = {:.3}", a.estimate_jaccard(&b).unwrap());
    println!("estimated J(original, edited)     = {:.3}", a.estimate_jaccard(&c).unwrap());

    let params = DedupParams::default();
    println!("\ncandidate probability with {} bands × {} rows:", params.bands, params.rows);
    for s in [0.5, 0.7, 0.8, 0.85, 0.9] {
        println!("  J={s:.2} → {:.3}", candidate_probability(s, params.bands, params.rows));
    }

    let (kept, outcome) = dedup_corpus(docs, &params);
    println!("\nkept {} documents, {} candidate pairs", kept.len(), outcome.candidate_pairs);
    for c in &outcome.clusters {
        println!("cluster kept {} removed {:?}", c.kept, c.removed);
        for (x, y, score) in &c.estimates {
            println!("    {x} ~ {y}: {score:.3}");
        }
    }
}
