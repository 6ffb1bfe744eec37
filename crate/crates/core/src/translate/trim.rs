use crate::lang::Lang;
use crate::segment::Segmenter;

/// Result of dropping an unfinished tail from model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trimmed {
    pub text: String,
    pub dropped: usize,
}

/// Drops trailing sentences that do not end in terminal punctuation.
///
/// The kept text runs from the first sentence start to the end of the last
/// terminal sentence, so leading whitespace is removed along with the tail.
pub fn trim_incomplete(segmenter: &Segmenter, raw: &str, lang: Lang) -> Trimmed {
    let sentences = segmenter.split(raw, lang);
    let keep = sentences.iter().rposition(|s| s.terminal).map_or(0, |i| i + 1);
    let dropped = sentences.len() - keep;
    let text = match (sentences.first(), keep) {
        (Some(first), k) if k > 0 => raw[first.span.start..sentences[k - 1].span.end].to_string(),
        _ => String::new(),
    };
    Trimmed { text, dropped }
}
