//! Gopher-style heuristic quality rules.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::lang::Lang;

const BULLETS: &[char] = &['•', '‣', '▪', '-', '*'];

const BUNDLED_STOPWORDS: [(Lang, &str); 4] = [
    (Lang::En, include_str!("../data/stopwords/en.txt")),
    (Lang::Fr, include_str!("../data/stopwords/fr.txt")),
    (Lang::De, include_str!("../data/stopwords/de.txt")),
    (Lang::Es, include_str!("../data/stopwords/es.txt")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleId {
    WordCount,
    MeanWordLength,
    SymbolRatio,
    BulletLines,
    EllipsisLines,
    AlphabeticWords,
    StopWords,
    DuplicateLines,
    DuplicateParagraphs,
}

impl RuleId {
    /// Evaluation order.
    pub const ALL: [RuleId; 9] = [
        RuleId::WordCount,
        RuleId::MeanWordLength,
        RuleId::SymbolRatio,
        RuleId::BulletLines,
        RuleId::EllipsisLines,
        RuleId::AlphabeticWords,
        RuleId::StopWords,
        RuleId::DuplicateLines,
        RuleId::DuplicateParagraphs,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub enabled: bool,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Max {
    pub enabled: bool,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Min {
    pub enabled: bool,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub word_count: Range,
    pub mean_word_length: Range,
    /// ("#" + ellipsis occurrences) / words.
    pub symbol_ratio: Max,
    pub bullet_lines: Max,
    pub ellipsis_lines: Max,
    pub alphabetic_words: Min,
    /// Minimum number of distinct stop words present.
    pub stop_words: Min,
    pub duplicate_lines: Max,
    pub duplicate_paragraphs: Max,
    /// Per-language stop-word files; bundled lists are used otherwise.
    pub stopword_paths: BTreeMap<Lang, PathBuf>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            word_count: Range { enabled: true, min: 50.0, max: 100_000.0 },
            mean_word_length: Range { enabled: true, min: 3.0, max: 10.0 },
            symbol_ratio: Max { enabled: true, max: 0.1 },
            bullet_lines: Max { enabled: true, max: 0.9 },
            ellipsis_lines: Max { enabled: true, max: 0.3 },
            alphabetic_words: Min { enabled: true, min: 0.8 },
            stop_words: Min { enabled: true, min: 2.0 },
            duplicate_lines: Max { enabled: false, max: 0.3 },
            duplicate_paragraphs: Max { enabled: false, max: 0.3 },
            stopword_paths: BTreeMap::new(),
        }
    }
}

impl RuleConfig {
    pub fn enabled_rules(&self) -> Vec<RuleId> {
        RuleId::ALL.into_iter().filter(|r| self.bounds(*r).0).collect()
    }

    /// (enabled, min, max) for a rule.
    fn bounds(&self, rule: RuleId) -> (bool, f64, f64) {
        let r = |x: Range| (x.enabled, x.min, x.max);
        let mx = |x: Max| (x.enabled, f64::NEG_INFINITY, x.max);
        let mn = |x: Min| (x.enabled, x.min, f64::INFINITY);
        match rule {
            RuleId::WordCount => r(self.word_count),
            RuleId::MeanWordLength => r(self.mean_word_length),
            RuleId::SymbolRatio => mx(self.symbol_ratio),
            RuleId::BulletLines => mx(self.bullet_lines),
            RuleId::EllipsisLines => mx(self.ellipsis_lines),
            RuleId::AlphabeticWords => mn(self.alphabetic_words),
            RuleId::StopWords => mn(self.stop_words),
            RuleId::DuplicateLines => mx(self.duplicate_lines),
            RuleId::DuplicateParagraphs => mx(self.duplicate_paragraphs),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("no stop-word list for language `{0}`")]
    MissingStopwords(Lang),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: RuleId,
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Every enabled rule, in evaluation order, even after a failure.
    pub rules: Vec<RuleResult>,
    pub verdict: Verdict,
    pub first_failure: Option<RuleId>,
}

/// Rules plus loaded stop-word lists.
#[derive(Debug, Clone)]
pub struct QualityFilter {
    config: RuleConfig,
    stopwords: HashMap<Lang, HashSet<String>>,
}

fn parse_words(text: &str) -> HashSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect()
}

impl QualityFilter {
    pub fn new(config: RuleConfig) -> Result<Self, QualityError> {
        let mut stopwords: HashMap<Lang, HashSet<String>> =
            BUNDLED_STOPWORDS.iter().map(|(l, t)| (*l, parse_words(t))).collect();
        for (lang, path) in &config.stopword_paths {
            stopwords.insert(*lang, load_words(path)?);
        }
        Ok(Self { config, stopwords })
    }

    pub fn config(&self) -> &RuleConfig {
        &self.config
    }

    pub fn evaluate(&self, doc: &Document) -> Result<QualityReport, QualityError> {
        let m = Metrics::measure(&doc.text);
        let mut rules = Vec::new();
        for rule in RuleId::ALL {
            let (enabled, min, max) = self.config.bounds(rule);
            if !enabled {
                continue;
            }
            let value = match rule {
                RuleId::WordCount => m.words as f64,
                RuleId::MeanWordLength => m.mean_word_length,
                RuleId::SymbolRatio => m.symbol_ratio,
                RuleId::BulletLines => m.bullet_lines,
                RuleId::EllipsisLines => m.ellipsis_lines,
                RuleId::AlphabeticWords => m.alphabetic_words,
                RuleId::StopWords => {
                    let list = self.stopwords.get(&doc.lang).ok_or(QualityError::MissingStopwords(doc.lang))?;
                    distinct_stopwords(&doc.text, list) as f64
                }
                RuleId::DuplicateLines => m.duplicate_lines,
                RuleId::DuplicateParagraphs => m.duplicate_paragraphs,
            };
            rules.push(RuleResult { rule, value, pass: value >= min && value <= max });
        }
        let first_failure = rules.iter().find(|r| !r.pass).map(|r| r.rule);
        Ok(QualityReport {
            verdict: if first_failure.is_none() { Verdict::Keep } else { Verdict::Reject },
            rules,
            first_failure,
        })
    }
}

fn load_words(path: &Path) -> Result<HashSet<String>, QualityError> {
    std::fs::read_to_string(path)
        .map(|t| parse_words(&t))
        .map_err(|source| QualityError::Io { path: path.to_path_buf(), source })
}

fn distinct_stopwords(text: &str, list: &HashSet<String>) -> usize {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| list.contains(w))
        .collect::<HashSet<_>>()
        .len()
}

/// Raw document measurements behind the rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub words: usize,
    pub mean_word_length: f64,
    pub symbol_ratio: f64,
    pub bullet_lines: f64,
    pub ellipsis_lines: f64,
    pub alphabetic_words: f64,
    pub duplicate_lines: f64,
    pub duplicate_paragraphs: f64,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

fn duplicate_fraction<'a>(items: impl Iterator<Item = &'a str>) -> f64 {
    let mut seen = HashSet::new();
    let (mut total, mut dup) = (0, 0);
    for item in items {
        total += 1;
        if !seen.insert(item) {
            dup += 1;
        }
    }
    ratio(dup, total)
}

impl Metrics {
    pub fn measure(text: &str) -> Self {
        let words: Vec<&str> = text.split_whitespace().collect();
        let chars: usize = words.iter().map(|w| w.chars().count()).sum();
        let symbols = text.matches('#').count() + text.matches('…').count() + text.matches("...").count();
        let alphabetic = words.iter().filter(|w| w.chars().any(char::is_alphabetic)).count();
        let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let bullets = lines.iter().filter(|l| l.starts_with(BULLETS)).count();
        let ellipsis = lines.iter().filter(|l| l.ends_with('…') || l.ends_with("...")).count();
        let paragraphs = text.split("\n\n").map(str::trim).filter(|p| !p.is_empty());
        Self {
            words: words.len(),
            mean_word_length: ratio(chars, words.len()),
            symbol_ratio: ratio(symbols, words.len()),
            bullet_lines: ratio(bullets, lines.len()),
            ellipsis_lines: ratio(ellipsis, lines.len()),
            alphabetic_words: ratio(alphabetic, words.len()),
            duplicate_lines: duplicate_fraction(lines.iter().copied()),
            duplicate_paragraphs: duplicate_fraction(paragraphs),
        }
    }
}

/// A rejected document together with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDocument {
    #[serde(flatten)]
    pub document: Document,
    pub quality: QualityReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub kept: u64,
    pub rejected: u64,
    pub first_failures: BTreeMap<RuleId, u64>,
    pub active_rules: Vec<RuleId>,
}

/// Partitions `docs` into kept and rejected, preserving order in each.
pub fn filter_corpus<I>(
    docs: I,
    filter: &QualityFilter,
    mut keep: impl FnMut(Document) -> std::io::Result<()>,
    mut reject: impl FnMut(RejectedDocument) -> std::io::Result<()>,
) -> Result<FilterSummary, FilterError>
where
    I: IntoIterator<Item = Document>,
{
    let mut summary = FilterSummary { active_rules: filter.config.enabled_rules(), ..Default::default() };
    for doc in docs {
        let report = filter.evaluate(&doc)?;
        match report.first_failure {
            None => {
                summary.kept += 1;
                keep(doc)?;
            }
            Some(rule) => {
                summary.rejected += 1;
                *summary.first_failures.entry(rule).or_default() += 1;
                reject(RejectedDocument { document: doc, quality: report })?;
            }
        }
    }
    Ok(summary)
}

#[derive(Debug, thiserror::Error)]
pub enum FilterError {
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
