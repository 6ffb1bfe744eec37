use serde::{Deserialize, Serialize};

use super::langid::LangIdModel;
use crate::lang::Lang;

/// Margin a line or block needs before it counts as clearly one language.
pub const CONFIDENT_MARGIN: f64 = 0.6;

/// Language names, English and native, recognised as `Name:` line prefixes.
pub const LANGUAGE_NAMES: &[&str] = &[
    "english",
    "french",
    "german",
    "spanish",
    "italian",
    "portuguese",
    "dutch",
    "czech",
    "polish",
    "russian",
    "ukrainian",
    "swedish",
    "danish",
    "norwegian",
    "finnish",
    "greek",
    "hungarian",
    "romanian",
    "bulgarian",
    "croatian",
    "serbian",
    "slovak",
    "slovenian",
    "estonian",
    "latvian",
    "lithuanian",
    "irish",
    "catalan",
    "basque",
    "turkish",
    "arabic",
    "hebrew",
    "chinese",
    "japanese",
    "korean",
    "hindi",
    "vietnamese",
    "indonesian",
    "français",
    "francais",
    "anglais",
    "allemand",
    "espagnol",
    "deutsch",
    "englisch",
    "französisch",
    "spanisch",
    "español",
    "espanol",
    "inglés",
    "ingles",
    "francés",
    "alemán",
    "italiano",
    "português",
    "nederlands",
    "čeština",
    "polski",
    "русский",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PairEvidence {
    /// Two or more lines start with distinct language names and a colon.
    LanguageLabels { names: Vec<String> },
    /// A line holds two sides separated by a tab, each in its own language.
    TabSeparated { line: usize, left: Lang, right: Lang },
    /// Consecutive lines or blocks alternate between two languages.
    Alternating { languages: [Lang; 2], units: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDetection {
    pub is_pair: bool,
    pub evidence: Vec<PairEvidence>,
}

fn label_prefix(line: &str) -> Option<String> {
    let (head, _) = line.trim_start().split_once(':')?;
    let name = head.trim().to_lowercase();
    LANGUAGE_NAMES.contains(&name.as_str()).then_some(name)
}

fn split_tab(line: &str) -> Option<(&str, &str)> {
    line.split_once('\t').or_else(|| line.split_once("<tab>"))
}

fn confident(model: &LangIdModel, text: &str) -> Option<Lang> {
    let s = model.classify(text, CONFIDENT_MARGIN);
    (s.label != Lang::Other).then_some(s.label)
}

/// Decides whether `text` looks like a translation pair rather than
/// monolingual output. Text whose every line is confidently the same
/// language is never a pair.
pub fn detect_translation_pair(model: &LangIdModel, text: &str, margin_threshold: f64) -> PairDetection {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut evidence = Vec::new();

    let mut names: Vec<String> = lines.iter().filter_map(|l| label_prefix(l)).collect();
    names.sort();
    names.dedup();
    if names.len() >= 2 {
        evidence.push(PairEvidence::LanguageLabels { names });
    }

    for (i, line) in lines.iter().enumerate() {
        if let Some((l, r)) = split_tab(line) {
            let left = model.classify(l, margin_threshold).label;
            let right = model.classify(r, margin_threshold).label;
            if left != Lang::Other && right != Lang::Other && left != right {
                evidence.push(PairEvidence::TabSeparated { line: i, left, right });
            }
        }
    }

    let blocks: Vec<&str> = text.split("\n\n").map(str::trim).filter(|b| !b.is_empty()).collect();
    let units = if blocks.len() >= 2 { blocks } else { lines.iter().map(|l| l.trim()).collect() };
    if units.len() >= 2 {
        let labels: Option<Vec<Lang>> = units.iter().map(|u| confident(model, u)).collect();
        if let Some(labels) = labels {
            let alternating = labels[0] != labels[1] && labels.iter().enumerate().all(|(i, l)| *l == labels[i % 2]);
            if alternating {
                evidence.push(PairEvidence::Alternating { languages: [labels[0], labels[1]], units: labels.len() });
            }
        }
    }

    let monolingual = !lines.is_empty() && {
        let first = confident(model, lines[0]);
        first.is_some() && lines.iter().all(|l| confident(model, l) == first)
    };
    if monolingual {
        evidence.clear();
    }
    PairDetection { is_pair: !evidence.is_empty(), evidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::DEFAULT_MARGIN_THRESHOLD;

    #[test]
    fn labelled_pair() {
        let m = LangIdModel::bundled();
        let t = "English: The weather is nice today and we are going to the park.\n\n\
                 French: Il fait beau aujourd'hui et nous allons au parc.";
        let d = detect_translation_pair(&m, t, DEFAULT_MARGIN_THRESHOLD);
        assert!(d.is_pair);
        assert!(matches!(d.evidence[0], PairEvidence::LanguageLabels { .. }));
    }

    #[test]
    fn monolingual_text_is_not_a_pair() {
        let m = LangIdModel::bundled();
        let t = "The weather is nice today and we are going to the park.\n\
                 After lunch we will walk back home through the old town.";
        assert!(!detect_translation_pair(&m, t, DEFAULT_MARGIN_THRESHOLD).is_pair);
    }

    #[test]
    fn alternating_lines() {
        let m = LangIdModel::bundled();
        let t = "The children are playing in the garden with their friends.\n\
                 Die Kinder spielen mit ihren Freunden im Garten.";
        let d = detect_translation_pair(&m, t, DEFAULT_MARGIN_THRESHOLD);
        assert!(d.is_pair, "{d:?}");
    }
}
