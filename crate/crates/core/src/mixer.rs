//! Token-budget sampling and stage mixtures.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, CorpusReader, Document, RecordError, TokenCounter};
use crate::seeds::sub_seed;

pub const DEFAULT_SHUFFLE_BUFFER: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum MixError {
    #[error("source `{source_name}` has {available} tokens, {budget} requested (short by {})", budget - available)]
    Shortfall { source_name: String, available: u64, budget: u64 },
    #[error("invalid mixture `{stage}`: {message}")]
    Spec { stage: String, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Samples whole documents without replacement, in random order, until the
/// running total reaches `budget`. The document that crosses the budget is
/// included. Returns indices into `token_counts` in sampled order.
pub fn balanced_sample(token_counts: &[u64], budget: u64, seed: u64) -> Result<Vec<usize>, u64> {
    let available: u64 = token_counts.iter().sum();
    if available < budget {
        return Err(available);
    }
    let mut order: Vec<usize> = (0..token_counts.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut total = 0;
    let mut take = 0;
    while total < budget {
        total += token_counts[order[take]];
        take += 1;
    }
    order.truncate(take);
    Ok(order)
}

/// Random merge of several streams followed by a bounded shuffle buffer.
///
/// The next item is drawn from source `k` with probability proportional to
/// its remaining length, so every label sequence is equally likely. The
/// buffer then mixes positions further; `buffer == 0` means an exact global
/// shuffle.
pub struct Interleave<I: Iterator> {
    sources: Vec<(I, usize)>,
    remaining: usize,
    rng: ChaCha8Rng,
    buffer: Vec<I::Item>,
    capacity: usize,
    drain: VecDeque<I::Item>,
}

impl<I: Iterator> Interleave<I> {
    /// `sources` pairs each stream with its exact length.
    pub fn new(sources: Vec<(I, usize)>, seed: u64, buffer: usize) -> Self {
        let remaining = sources.iter().map(|s| s.1).sum();
        Self {
            sources,
            remaining,
            rng: ChaCha8Rng::seed_from_u64(seed),
            buffer: Vec::new(),
            capacity: if buffer == 0 { usize::MAX } else { buffer },
            drain: VecDeque::new(),
        }
    }

    fn pull(&mut self) -> Option<I::Item> {
        while self.remaining > 0 {
            let mut r = self.rng.random_range(0..self.remaining);
            let k = self
                .sources
                .iter()
                .position(|(_, n)| {
                    if r < *n {
                        true
                    } else {
                        r -= n;
                        false
                    }
                })
                .expect("r < remaining");
            let (it, n) = &mut self.sources[k];
            *n -= 1;
            self.remaining -= 1;
            match it.next() {
                Some(x) => return Some(x),
                // stream shorter than announced: stop drawing from it
                None => {
                    self.remaining -= *n;
                    *n = 0;
                }
            }
        }
        None
    }
}

impl<I: Iterator> Iterator for Interleave<I> {
    type Item = I::Item;

    fn next(&mut self) -> Option<I::Item> {
        if let Some(x) = self.drain.pop_front() {
            return Some(x);
        }
        while self.buffer.len() < self.capacity {
            match self.pull() {
                Some(x) => self.buffer.push(x),
                None => {
                    let mut rest = std::mem::take(&mut self.buffer);
                    rest.shuffle(&mut self.rng);
                    self.drain = rest.into();
                    return self.drain.pop_front();
                }
            }
        }
        let j = self.rng.random_range(0..self.buffer.len());
        match self.pull() {
            Some(x) => Some(std::mem::replace(&mut self.buffer[j], x)),
            None => Some(self.buffer.swap_remove(j)),
        }
    }
}

pub fn interleave<T>(sources: Vec<Vec<T>>, seed: u64, buffer: usize) -> Vec<T> {
    let sources = sources.into_iter().map(|v| {
        let n = v.len();
        (v.into_iter(), n)
    });
    Interleave::new(sources.collect(), seed, buffer).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSource {
    pub name: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub stage: String,
    /// Stage budget; required when sources use weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<u64>,
    /// Overrides the seed derived from the global seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_buffer")]
    pub shuffle_buffer: usize,
    pub sources: Vec<MixtureSource>,
}

fn default_buffer() -> usize {
    DEFAULT_SHUFFLE_BUFFER
}

impl MixtureSpec {
    fn err(&self, message: impl Into<String>) -> MixError {
        MixError::Spec { stage: self.stage.clone(), message: message.into() }
    }

    /// Per-source token budgets, resolving weights against `total_tokens`.
    pub fn budgets(&self) -> Result<Vec<u64>, MixError> {
        if self.sources.is_empty() {
            return Err(self.err("no sources"));
        }
        let budgets: Option<Vec<u64>> = self.sources.iter().map(|s| s.budget).collect();
        let weights: Option<Vec<f64>> = self.sources.iter().map(|s| s.weight).collect();
        let mixed = self.sources.iter().any(|s| s.budget.is_some() == s.weight.is_some());
        match (budgets, weights) {
            (Some(b), None) if !mixed => Ok(b),
            (None, Some(w)) if !mixed => {
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(self.err("weights must be non-negative"));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(self.err(format!("weights sum to {sum}, expected 1")));
                }
                let total = self.total_tokens.ok_or_else(|| self.err("weights need total_tokens"))?;
                Ok(w.iter().map(|x| (x * total as f64).round() as u64).collect())
            }
            _ => Err(self.err("every source needs exactly one of budget or weight, used uniformly")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceReport {
    pub name: String,
    pub path: PathBuf,
    pub budget: u64,
    pub available_tokens: u64,
    pub realized_tokens: u64,
    pub documents: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionManifest {
    pub stage: String,
    pub seed: u64,
    pub shuffle_buffer: usize,
    pub tokenizer_fingerprint: String,
    pub sources: Vec<SourceReport>,
    pub total_tokens: u64,
    pub total_documents: u64,
    pub input_errors: Vec<(String, RecordError)>,
}

/// A source loaded into memory with per-document token counts.
#[derive(Debug, Clone)]
pub struct LoadedSource {
    pub name: String,
    pub path: PathBuf,
    pub docs: Vec<Document>,
    pub tokens: Vec<u64>,
}

impl LoadedSource {
    pub fn load(
        name: &str,
        path: &Path,
        counter: &TokenCounter,
        strict: bool,
        errors: &mut Vec<(String, RecordError)>,
    ) -> Result<Self, MixError> {
        let reader = CorpusReader::open(path)?;
        let trust_cache =
            reader.header().and_then(|h| h.tokenizer_fingerprint.as_deref()) == Some(counter.fingerprint());
        let mut docs = Vec::new();
        for item in reader {
            match item {
                Ok(d) => docs.push(d),
                Err(e) if strict => return Err(CorpusError::Malformed { path: path.to_path_buf(), source: e }.into()),
                Err(e) => errors.push((name.to_string(), e)),
            }
        }
        let tokens = docs
            .par_iter()
            .map(|d| match d.token_count {
                Some(n) if trust_cache => n,
                _ => counter.count(&d.text) as u64,
            })
            .collect();
        Ok(Self { name: name.to_string(), path: path.to_path_buf(), docs, tokens })
    }

    pub fn from_docs(name: &str, docs: Vec<Document>, counter: &TokenCounter) -> Self {
        let tokens = docs.par_iter().map(|d| counter.count(&d.text) as u64).collect();
        Self { name: name.to_string(), path: PathBuf::new(), docs, tokens }
    }

    pub fn available(&self) -> u64 {
        self.tokens.iter().sum()
    }
}

/// Samples each source to its budget and interleaves the samples.
///
/// Every shortfall is reported before any sampling happens, so a failing
/// stage produces no partial output.
pub fn compose(
    stage: &str,
    sources: Vec<LoadedSource>,
    budgets: &[u64],
    seed: u64,
    shuffle_buffer: usize,
) -> Result<(Vec<Document>, Vec<SourceReport>), MixError> {
    assert_eq!(sources.len(), budgets.len());
    let short: Vec<String> = sources
        .iter()
        .zip(budgets)
        .filter(|(s, b)| s.available() < **b)
        .map(|(s, b)| format!("{}: {} of {} tokens", s.name, s.available(), b))
        .collect();
    if short.len() == 1 {
        let (s, b) = sources.iter().zip(budgets).find(|(s, b)| s.available() < **b).unwrap();
        return Err(MixError::Shortfall { source_name: s.name.clone(), available: s.available(), budget: *b });
    } else if !short.is_empty() {
        return Err(MixError::Spec {
            stage: stage.to_string(),
            message: format!("sources short of budget: {}", short.join("; ")),
        });
    }

    let mut reports = Vec::new();
    let mut samples = Vec::new();
    for (src, &budget) in sources.into_iter().zip(budgets) {
        let s = sub_seed(seed, &src.name);
        let idx = balanced_sample(&src.tokens, budget, s).expect("checked above");
        let realized = idx.iter().map(|&i| src.tokens[i]).sum();
        reports.push(SourceReport {
            name: src.name.clone(),
            path: src.path.clone(),
            budget,
            available_tokens: src.available(),
            realized_tokens: realized,
            documents: idx.len() as u64,
            seed: s,
        });
        let mut slots: Vec<Option<Document>> = src.docs.into_iter().map(Some).collect();
        samples.push(idx.into_iter().map(|i| slots[i].take().unwrap()).collect::<Vec<_>>());
    }
    let mixed = interleave(samples, sub_seed(seed, "interleave"), shuffle_buffer);
    Ok((mixed, reports))
}

/// Loads the sources of `spec` and composes them.
pub fn compose_stage(
    spec: &MixtureSpec,
    counter: &TokenCounter,
    global_seed: u64,
    strict: bool,
) -> Result<(Vec<Document>, CompositionManifest), MixError> {
    let budgets = spec.budgets()?;
    let seed = spec.seed.unwrap_or_else(|| sub_seed(global_seed, &format!("mix/{}", spec.stage)));
    let mut errors = Vec::new();
    let mut sources = Vec::new();
    for s in &spec.sources {
        sources.push(LoadedSource::load(&s.name, &s.path, counter, strict, &mut errors)?);
    }
    let (docs, reports) = compose(&spec.stage, sources, &budgets, seed, spec.shuffle_buffer)?;
    let manifest = CompositionManifest {
        stage: spec.stage.clone(),
        seed,
        shuffle_buffer: spec.shuffle_buffer,
        tokenizer_fingerprint: counter.fingerprint().to_string(),
        total_tokens: reports.iter().map(|r| r.realized_tokens).sum(),
        total_documents: docs.len() as u64,
        sources: reports,
        input_errors: errors,
    };
    Ok((docs, manifest))
}
