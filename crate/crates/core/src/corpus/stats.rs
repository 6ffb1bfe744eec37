use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Document, TokenCounter};
use crate::lang::Lang;

/// One row of the per-language statistics table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LangStats {
    pub token_total: u64,
    pub doc_count: u64,
    pub avg_doc_length: f64,
}

impl LangStats {
    pub fn from_totals(token_total: u64, doc_count: u64) -> Self {
        let avg_doc_length = if doc_count == 0 { 0.0 } else { token_total as f64 / doc_count as f64 };
        Self { token_total, doc_count, avg_doc_length }
    }

    /// `|avg × count − total| ≤ count / 2`: the average is consistent with
    /// the totals up to rounding.
    pub fn is_consistent(&self) -> bool {
        let implied = self.avg_doc_length * self.doc_count as f64;
        (implied - self.token_total as f64).abs() <= self.doc_count as f64 * 0.5
    }
}

/// Document count implied by a reported token total and average length.
pub fn implied_doc_count(token_total: f64, avg_doc_length: f64) -> f64 {
    token_total / avg_doc_length
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub languages: BTreeMap<Lang, LangStats>,
    pub total: LangStats,
    pub tokenizer_fingerprint: String,
}

impl CorpusStats {
    pub fn get(&self, lang: Lang) -> Option<&LangStats> {
        self.languages.get(&lang)
    }
}

/// Single-pass accumulator; order of `add` calls does not matter.
#[derive(Debug, Clone, Default)]
pub struct StatsBuilder {
    totals: BTreeMap<Lang, (u64, u64)>,
}

impl StatsBuilder {
    pub fn add(&mut self, lang: Lang, tokens: u64) {
        let e = self.totals.entry(lang).or_default();
        e.0 += tokens;
        e.1 += 1;
    }

    pub fn finish(self, tokenizer_fingerprint: impl Into<String>) -> CorpusStats {
        let languages: BTreeMap<_, _> =
            self.totals.into_iter().map(|(l, (t, n))| (l, LangStats::from_totals(t, n))).collect();
        let (t, n) = languages.values().fold((0, 0), |(t, n), s| (t + s.token_total, n + s.doc_count));
        CorpusStats {
            languages,
            total: LangStats::from_totals(t, n),
            tokenizer_fingerprint: tokenizer_fingerprint.into(),
        }
    }
}

pub fn compute_stats<I>(docs: I, counter: &TokenCounter) -> CorpusStats
where
    I: IntoIterator<Item = Document>,
{
    let mut b = StatsBuilder::default();
    for doc in docs {
        b.add(doc.lang, counter.count(&doc.text) as u64);
    }
    b.finish(counter.fingerprint())
}
