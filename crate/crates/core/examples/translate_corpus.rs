//! Translate an English corpus into French, German and Spanish with a mock
//! backend, interrupt the run, and resume it from the journal.
//!
//! Swap `CipherBackend` for `HttpBackend::new(HttpConfig { .. })` to talk to
//! an OpenAI-compatible completion server.
//!
//! ```bash
//! cargo run -p twp --example translate_corpus
//! ```

use twp::corpus::jsonl::{read_all, write_all};
use twp::segment::{ChunkConfig, Segmenter};
use twp::translate::{
    output_path, translate_corpus, CipherBackend, CorpusRunOptions, GenerationParams, PromptTemplate, RetryPolicy,
    RunMode, TranslateError, Translator,
};
use twp::{Document, Lang, TokenCounter};

const EN: &str = include_str!("../data/seeds/en.txt");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("en.jsonl");
    let out = dir.path().join("translated");
    let lines: Vec<&str> = EN.lines().filter(|l| !l.trim().is_empty()).collect();
    let docs: Vec<Document> = lines
        .chunks(8)
        .take(12)
        .enumerate()
        .map(|(i, c)| Document::new(format!("doc-{i:02}"), Lang::En, c.join(" ")))
        .collect();
    write_all(&input, &docs)?;

    let template = PromptTemplate::default();
    println!("prompt for the first chunk:\n{}\n", template.render("The sky is blue.", Lang::En, Lang::Fr)?);

    let segmenter = Segmenter::bundled();
    let counter = TokenCounter::bundled_bpe();
    let translator = Translator {
        backend: &CipherBackend,
        template: &template,
        segmenter: &segmenter,
        counter: &counter,
        chunking: ChunkConfig::default(),
        params: GenerationParams::default(),
        retry: RetryPolicy::default(),
        max_in_flight: 8,
    };

    // simulate a crash after ten (document, language) pairs
    let crash = CorpusRunOptions { window: 4, stop_after_pairs: Some(10), ..Default::default() };
    match translate_corpus(&input, &out, &translator, &crash) {
        Err(TranslateError::Interrupted { .. }) => println!("interrupted after 10 pairs"),
        other => println!("unexpected: {other:?}"),
    }

    let resume = CorpusRunOptions { mode: RunMode::Resume, window: 4, ..Default::default() };
    let summary = translate_corpus(&input, &out, &translator, &resume)?;
    println!("resumed {} journaled pairs", summary.resumed_pairs);
    for (lang, counts) in &summary.manifest.targets {
        println!("{lang}: {counts:?}");
    }

    let (fr, _) = read_all(output_path(&out, Lang::Fr), true)?;
    let first = &fr[0];
    println!("\n{} ({}): {}…", first.id, first.lang, first.text.chars().take(80).collect::<String>());
    Ok(())
}
