//! Pack tokenized documents into fixed-length sequences separated by EOS,
//! then read the binary file back.
//!
//! ```bash
//! cargo run -p twp --example pack_sequences
//! ```

use twp::pack::{pack_stream, tokens_per_batch, unpack_inspect, PackReader};
use twp::{Document, Lang, TokenCounter};

const FR: &str = include_str!("../data/seeds/fr.txt");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("packed.bin");
    let lines: Vec<&str> = FR.lines().filter(|l| !l.trim().is_empty()).collect();
    let docs: Vec<Document> =
        lines.chunks(6).enumerate().map(|(i, c)| Document::new(format!("fr-{i}"), Lang::Fr, c.join(" "))).collect();

    let counter = TokenCounter::bundled_bpe();
    let seq_len = 512;
    let m = pack_stream(docs, &counter, seq_len, &path)?;
    println!("{m:#?}");
    println!(
        "{} + {} = {} × {} + {} holds: {}",
        m.total_doc_tokens,
        m.eos_count,
        m.sequence_count,
        m.seq_len,
        m.dropped_remainder,
        m.identity_holds()
    );

    let reader = PackReader::open(&path)?;
    println!("header: {:?}", reader.header());
    let first = &unpack_inspect(&path, 1, Some(seq_len))?[0];
    let eos = first.iter().position(|&t| t == counter.eos_id());
    println!("first sequence starts {:?}…, first EOS at {eos:?}", &first[..8]);
    println!("tokens per batch of 1024 × 2048: {}", tokens_per_batch(2048, 1024));
    Ok(())
}
