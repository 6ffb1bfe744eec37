//! Identify languages with the character n-gram model, flag translation-pair
//! outputs, and measure the language prior of a (mock) generator.
//!
//! ```bash
//! cargo run -p twp --example language_prior
//! ```

use twp::probe::{detect_translation_pair, probe_prior, LangIdModel, ProbeParams, DEFAULT_MARGIN_THRESHOLD};
use twp::translate::{RetryPolicy, ScriptedBackend};

fn main() {
    let model = LangIdModel::bundled();
    for text in [
        "The committee will publish its findings next week.",
        "Le comité publiera ses conclusions la semaine prochaine.",
        "Der Ausschuss veröffentlicht seine Ergebnisse nächste Woche.",
        "El comité publicará sus conclusiones la próxima semana.",
        "ok",
        "404 -- 17:32",
    ] {
        let s = model.classify(text, DEFAULT_MARGIN_THRESHOLD);
        println!("{:<6} margin {:.3} low_conf {:<5} {text}", s.label.code(), s.margin, s.low_confidence);
    }

    let pair = "English: The museum opens at nine.\n\nGerman: Das Museum öffnet um neun.";
    let d = detect_translation_pair(&model, pair, DEFAULT_MARGIN_THRESHOLD);
    println!("\npair? {} {:?}", d.is_pair, d.evidence);

    // a generator that answers in French twice as often as in English
    let backend = ScriptedBackend::new([
        "Le marché ouvre tôt le samedi et les producteurs arrivent avant l'aube.",
        "La pluie a cessé vers midi et les rues se sont vite remplies.",
        "The market opens early on Saturday and the growers arrive before dawn.",
    ]);
    let params = ProbeParams { samples: 512, ..Default::default() };
    let (report, _) = probe_prior(&backend, &model, &params, &RetryPolicy::no_backoff(1));
    println!("\n{} generations:", report.obtained);
    for (lang, pct) in &report.percentages {
        println!("  {:<6} {pct:>5.1}%", lang.code());
    }
    println!("  translation pairs {:.1}%", report.translation_pair_percent);
}
