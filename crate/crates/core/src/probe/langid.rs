use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lang::Lang;

pub const MAX_N: usize = 3;
pub const MIN_TRAINING_CHARS: usize = 10_000;
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 0.15;
/// Texts shorter than this are flagged as low confidence.
pub const LOW_CONFIDENCE_CHARS: usize = 20;
/// Trailing lines of each bundled seed file reserved for evaluation.
pub const HELD_OUT_LINES: usize = 100;

const SEEDS: [(Lang, &str); 4] = [
    (Lang::En, include_str!("../../data/seeds/en.txt")),
    (Lang::Fr, include_str!("../../data/seeds/fr.txt")),
    (Lang::De, include_str!("../../data/seeds/de.txt")),
    (Lang::Es, include_str!("../../data/seeds/es.txt")),
];

/// Bundled seed text split into (training lines, held-out lines).
pub fn bundled_seeds() -> Vec<(Lang, Vec<&'static str>, Vec<&'static str>)> {
    SEEDS
        .iter()
        .map(|(lang, text)| {
            let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            let split = lines.len().saturating_sub(HELD_OUT_LINES);
            (*lang, lines[..split].to_vec(), lines[split..].to_vec())
        })
        .collect()
}

#[derive(Debug, thiserror::Error)]
pub enum LangIdError {
    #[error("seed text for `{lang}` has {chars} characters, need at least {min}")]
    InsufficientSeed { lang: Lang, chars: usize, min: usize },
    #[error("no seed corpora given")]
    NoSeeds,
    #[error("`other` is the rejection label and cannot be trained")]
    OtherSeed,
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

/// Lowercase letters with every other character folded to a single space,
/// padded with one space on each side. Empty when there are no letters.
pub fn normalize(text: &str) -> String {
    let mut out = String::from(" ");
    for c in text.chars() {
        if c.is_alphabetic() {
            out.extend(c.to_lowercase());
        } else if !out.ends_with(' ') {
            out.push(' ');
        }
    }
    if out.len() == 1 {
        return String::new();
    }
    if !out.ends_with(' ') {
        out.push(' ');
    }
    out
}

fn for_each_gram<'a>(norm: &'a str, mut f: impl FnMut(&'a str)) {
    let idx: Vec<usize> = norm.char_indices().map(|(i, _)| i).chain([norm.len()]).collect();
    let chars = idx.len() - 1;
    for n in 1..=MAX_N {
        for start in 0..chars.saturating_sub(n - 1) {
            let g = &norm[idx[start]..idx[start + n]];
            // a lone space carries no evidence
            if g != " " {
                f(g);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct LangCounts {
    total: u64,
    counts: BTreeMap<String, u64>,
}

/// Character 1–3-gram multinomial model with add-one smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangIdModel {
    format: u32,
    max_n: usize,
    vocab_size: u64,
    languages: BTreeMap<Lang, LangCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangScore {
    /// Mean log-probability per character, per trained language.
    pub scores: BTreeMap<Lang, f64>,
    pub label: Lang,
    /// Best score minus runner-up (or minus the uniform background when only
    /// one language is trained).
    pub margin: f64,
    pub low_confidence: bool,
}

impl LangIdModel {
    /// Trains from (language, lines) pairs. Lines are featurized
    /// independently, so line order does not affect the model.
    pub fn train<'a, I, L>(seeds: I) -> Result<Self, LangIdError>
    where
        I: IntoIterator<Item = (Lang, L)>,
        L: IntoIterator<Item = &'a str>,
    {
        let mut languages: BTreeMap<Lang, LangCounts> = BTreeMap::new();
        let mut vocab = BTreeSet::new();
        for (lang, lines) in seeds {
            if lang == Lang::Other {
                return Err(LangIdError::OtherSeed);
            }
            let entry = languages.entry(lang).or_default();
            let mut chars = 0;
            for line in lines {
                chars += line.chars().count();
                for_each_gram(&normalize(line), |g| {
                    *entry.counts.entry(g.to_string()).or_default() += 1;
                    entry.total += 1;
                    if !vocab.contains(g) {
                        vocab.insert(g.to_string());
                    }
                });
            }
            if chars < MIN_TRAINING_CHARS {
                return Err(LangIdError::InsufficientSeed { lang, chars, min: MIN_TRAINING_CHARS });
            }
        }
        if languages.is_empty() {
            return Err(LangIdError::NoSeeds);
        }
        Ok(Self { format: 1, max_n: MAX_N, vocab_size: vocab.len() as u64, languages })
    }

    /// Model trained on the training split of the bundled seed corpora.
    pub fn bundled() -> Self {
        Self::train(bundled_seeds().into_iter().map(|(l, train, _)| (l, train)))
            .expect("bundled seeds are large enough")
    }

    pub fn languages(&self) -> impl Iterator<Item = Lang> + '_ {
        self.languages.keys().copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self, LangIdError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), LangIdError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: &Path) -> Result<Self, LangIdError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn classify(&self, text: &str, margin_threshold: f64) -> LangScore {
        let norm = normalize(text);
        let letters = text.chars().filter(|c| c.is_alphabetic()).count();
        let low_confidence = text.trim().chars().count() < LOW_CONFIDENCE_CHARS;
        let chars = norm.chars().count();
        let mut grams: Vec<&str> = Vec::new();
        for_each_gram(&norm, |g| grams.push(g));

        let v = self.vocab_size as f64;
        let scores: BTreeMap<Lang, f64> = self
            .languages
            .iter()
            .map(|(lang, c)| {
                let denom = (c.total as f64 + v).ln();
                let sum: f64 =
                    grams.iter().map(|g| ((c.counts.get(*g).copied().unwrap_or(0) + 1) as f64).ln() - denom).sum();
                (*lang, if chars == 0 { 0.0 } else { sum / chars as f64 })
            })
            .collect();

        let mut ranked: Vec<(Lang, f64)> = scores.iter().map(|(l, s)| (*l, *s)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let (best, top) = ranked[0];
        let runner_up = match ranked.get(1) {
            Some((_, s)) => *s,
            None if chars == 0 => top,
            None => -(grams.len() as f64) * v.ln() / chars as f64,
        };
        let margin = if letters == 0 { 0.0 } else { top - runner_up };
        LangScore { label: if margin < margin_threshold { Lang::Other } else { best }, scores, margin, low_confidence }
    }
}
