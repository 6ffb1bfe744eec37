//! Run every stage (filter, dedup, translate, mix, pack) over a synthetic
//! corpus with the echo backend, stop half-way and resume.
//!
//! ```bash
//! cargo run -p twp --example pipeline
//! ```

use twp::cli::{run_pipeline, PipelineConfig, PipelineError, PipelineOptions, Stage, StopPoint};
use twp::corpus::jsonl::write_all;
use twp::translate::{EchoBackend, RunMode};
use twp::{Document, Lang};

const EN: &str = include_str!("../data/seeds/en.txt");

const CONFIG: &str = r#"
seed = 3
[backend]
kind = "echo"
[translate]
enabled = true
[pack]
seq_len = 256
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("in.jsonl");
    let out = dir.path().join("run");

    let lines: Vec<&str> = EN.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut docs: Vec<Document> =
        lines.chunks(7).enumerate().map(|(i, c)| Document::new(format!("doc-{i:03}"), Lang::En, c.join(" "))).collect();
    docs.push(Document::new("dup", Lang::En, docs[0].text.clone()));
    docs.push(Document::new("junk", Lang::En, "### BUY NOW ### ..."));
    write_all(&input, &docs)?;

    let config = PipelineConfig::from_toml(CONFIG, std::env::vars())?;
    let stop = PipelineOptions { mode: RunMode::Fresh, stop: Some(StopPoint::AfterStage(Stage::Dedup)) };
    match run_pipeline(&config, &EchoBackend, &input, &out, &stop) {
        Err(PipelineError::Interrupted(stage)) => println!("stopped after {stage:?}"),
        other => println!("unexpected: {:?}", other.map(|_| ())),
    }

    let resume = PipelineOptions { mode: RunMode::Resume, stop: None };
    let report = run_pipeline(&config, &EchoBackend, &input, &out, &resume)?;
    println!("reused stages: {:?}", report.skipped);
    println!("filter: kept {} rejected {}", report.filter.kept, report.filter.rejected);
    println!("dedup:  kept {} removed {}", report.dedup.kept, report.dedup.removed);
    if let Some(t) = &report.translate {
        for (lang, c) in &t.targets {
            println!("translate {lang}: {c:?}");
        }
    }
    println!("mix:    {} documents", report.mix.total_documents);
    println!(
        "pack:   {} sequences of {} tokens in {}",
        report.pack.sequence_count,
        report.pack.seq_len,
        out.join(Stage::Pack.dir_name()).display()
    );
    Ok(())
}
