//! Language identification and language-prior probing.

mod langid;
mod pairs;
mod prior;

pub use langid::{
    bundled_seeds, normalize, LangIdError, LangIdModel, LangScore, DEFAULT_MARGIN_THRESHOLD, HELD_OUT_LINES,
    LOW_CONFIDENCE_CHARS, MIN_TRAINING_CHARS,
};
pub use pairs::{detect_translation_pair, PairDetection, PairEvidence, CONFIDENT_MARGIN, LANGUAGE_NAMES};
pub use prior::{probe_prior, write_samples, PriorReport, ProbeParams, ProbeSample, REPORT_LABELS};
