//! Score documents against the heuristic quality rules and split a corpus
//! into kept and rejected documents.
//!
//! ```bash
//! cargo run -p twp --example quality_filter
//! ```

use twp::quality::{filter_corpus, QualityFilter, RuleConfig};
use twp::{Document, Lang};

const DE: &str = include_str!("../data/seeds/de.txt");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prose: String = DE.lines().filter(|l| !l.trim().is_empty()).take(12).collect::<Vec<_>>().join(" ");
    let docs = vec![
        Document::new("clean", Lang::De, prose.clone()),
        Document::new("short", Lang::De, "Zu kurz für ein Dokument."),
        Document::new("hashtags", Lang::De, format!("{prose} {}", vec!["#angebot"; 40].join(" "))),
        Document::new("bullets", Lang::De, prose.split(". ").map(|s| format!("• {s}")).collect::<Vec<_>>().join("\n")),
        Document::new(
            "numbers",
            Lang::De,
            format!("{prose} {}", (0..200).map(|i| i.to_string()).collect::<Vec<_>>().join(" ")),
        ),
    ];

    let mut config = RuleConfig::default();
    let filter = QualityFilter::new(config.clone())?;
    for doc in &docs {
        let r = filter.evaluate(doc)?;
        println!("{:<9} {:?} first failure: {:?}", doc.id, r.verdict, r.first_failure);
        for rule in &r.rules {
            println!(
                "    {:<18} {:>10.3} {}",
                format!("{:?}", rule.rule),
                rule.value,
                if rule.pass { "ok" } else { "FAIL" }
            );
        }
    }

    // thresholds are plain data; loosen one and re-run over the corpus
    config.bullet_lines.max = 1.0;
    let relaxed = QualityFilter::new(config)?;
    let (mut kept, mut rejected) = (Vec::new(), Vec::new());
    let summary = filter_corpus(
        docs,
        &relaxed,
        |d| {
            kept.push(d.id);
            Ok(())
        },
        |r| {
            rejected.push(r.document.id);
            Ok(())
        },
    )?;
    println!("\nwith bullets allowed: kept {kept:?}, rejected {rejected:?}");
    println!("{summary:?}");
    Ok(())
}
