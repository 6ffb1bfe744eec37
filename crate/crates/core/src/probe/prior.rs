use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::langid::{LangIdModel, DEFAULT_MARGIN_THRESHOLD};
use super::pairs::{detect_translation_pair, PairEvidence};
use crate::corpus::jsonl::append_json_line;
use crate::lang::Lang;
use crate::translate::{CompletionBackend, CompletionRequest, RetryPolicy};

/// Labels reported by the probe, in output order.
pub const REPORT_LABELS: [Lang; 5] = [Lang::En, Lang::Fr, Lang::De, Lang::Es, Lang::Other];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeParams {
    pub samples: usize,
    pub max_tokens: u32,
    pub temperature: f32,
    /// Prompt sent for every generation; normally just the BOS marker.
    pub prompt: String,
    /// Generation `i` is requested with seed `seed + i`.
    pub seed: u64,
    pub margin_threshold: f64,
    pub max_in_flight: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            samples: 512,
            max_tokens: 300,
            temperature: 1.0,
            prompt: "<s>".into(),
            seed: 0,
            margin_threshold: DEFAULT_MARGIN_THRESHOLD,
            max_in_flight: 8,
        }
    }
}

/// One generation and everything the probe concluded about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub index: usize,
    pub seed: u64,
    pub text: Option<String>,
    pub error: Option<String>,
    pub label: Option<Lang>,
    pub margin: Option<f64>,
    pub low_confidence: bool,
    pub translation_pair: bool,
    pub evidence: Vec<PairEvidence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReport {
    pub requested: usize,
    /// Generations that completed and were classified.
    pub obtained: usize,
    pub failed: usize,
    pub counts: BTreeMap<Lang, usize>,
    /// Share of obtained generations per label; sums to 100 when any were
    /// obtained, all zero otherwise.
    pub percentages: BTreeMap<Lang, f64>,
    pub low_confidence: usize,
    pub translation_pairs: usize,
    pub translation_pair_percent: f64,
    pub params: ProbeParams,
}

impl PriorReport {
    pub fn from_samples(samples: &[ProbeSample], params: &ProbeParams) -> Self {
        let mut counts: BTreeMap<Lang, usize> = REPORT_LABELS.iter().map(|l| (*l, 0)).collect();
        let mut obtained = 0;
        let mut pairs = 0;
        let mut low = 0;
        for s in samples {
            if let Some(label) = s.label {
                obtained += 1;
                *counts.entry(label).or_default() += 1;
                pairs += usize::from(s.translation_pair);
                low += usize::from(s.low_confidence);
            }
        }
        let pct = |n: usize| if obtained == 0 { 0.0 } else { 100.0 * n as f64 / obtained as f64 };
        Self {
            requested: params.samples,
            obtained,
            failed: samples.len() - obtained,
            percentages: counts.iter().map(|(l, n)| (*l, pct(*n))).collect(),
            counts,
            low_confidence: low,
            translation_pairs: pairs,
            translation_pair_percent: pct(pairs),
            params: params.clone(),
        }
    }
}

/// Samples unconditioned generations and classifies each one.
pub fn probe_prior(
    backend: &dyn CompletionBackend,
    model: &LangIdModel,
    params: &ProbeParams,
    retry: &RetryPolicy,
) -> (PriorReport, Vec<ProbeSample>) {
    let results: Vec<Mutex<Option<ProbeSample>>> = (0..params.samples).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = params.max_in_flight.max(1).min(params.samples.max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= params.samples {
                    break;
                }
                let seed = params.seed.wrapping_add(i as u64);
                let req = CompletionRequest {
                    prompt: &params.prompt,
                    source_text: "",
                    max_tokens: params.max_tokens,
                    temperature: params.temperature,
                    seed,
                };
                let sample = match retry.call(backend, &req) {
                    Ok(text) => classify_sample(model, i, seed, text, params.margin_threshold),
                    Err(e) => ProbeSample {
                        index: i,
                        seed,
                        text: None,
                        error: Some(e.to_string()),
                        label: None,
                        margin: None,
                        low_confidence: false,
                        translation_pair: false,
                        evidence: Vec::new(),
                    },
                };
                *results[i].lock().unwrap() = Some(sample);
            });
        }
    });
    let samples: Vec<ProbeSample> =
        results.into_iter().map(|m| m.into_inner().unwrap().expect("every sample ran")).collect();
    (PriorReport::from_samples(&samples, params), samples)
}

fn classify_sample(model: &LangIdModel, index: usize, seed: u64, text: String, threshold: f64) -> ProbeSample {
    let score = model.classify(&text, threshold);
    let pair = detect_translation_pair(model, &text, threshold);
    ProbeSample {
        index,
        seed,
        error: None,
        label: Some(score.label),
        margin: Some(score.margin),
        low_confidence: score.low_confidence,
        translation_pair: pair.is_pair,
        evidence: pair.evidence,
        text: Some(text),
    }
}

/// One JSON line per sample.
pub fn write_samples(out: &mut impl Write, samples: &[ProbeSample]) -> std::io::Result<()> {
    for s in samples {
        append_json_line(out, s)?;
    }
    out.flush()
}
