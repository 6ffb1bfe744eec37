#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twp::cli::PipelineConfig;
use twp::corpus::jsonl::write_all;
use twp::{Document, Lang};

const EN: &str = include_str!("../../data/seeds/en.txt");
const FR: &str = include_str!("../../data/seeds/fr.txt");
const DE: &str = include_str!("../../data/seeds/de.txt");
const ES: &str = include_str!("../../data/seeds/es.txt");

pub fn seed_lines(lang: Lang) -> Vec<&'static str> {
    let text = match lang {
        Lang::En => EN,
        Lang::Fr => FR,
        Lang::De => DE,
        Lang::Es => ES,
        Lang::Other => panic!("no seed text for other"),
    };
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// A plausible document: 6–14 seed sentences over one to three paragraphs.
pub fn prose(rng: &mut impl Rng, lang: Lang) -> String {
    let lines = seed_lines(lang);
    let n = rng.random_range(6..=14);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 {
            out.push_str(if rng.random_bool(0.15) { "\n\n" } else { " " });
        }
        out.push_str(lines.choose(rng).unwrap());
    }
    out
}

/// `n` English documents: mostly prose, with some exact copies and some
/// junk that the quality rules reject.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("doc-{i:05}");
        let roll: f64 = rng.random();
        let text = if roll < 0.05 && !docs.is_empty() {
            docs[rng.random_range(0..docs.len())].text.clone()
        } else if roll < 0.10 {
            "BUY NOW!!! ### ### ### click here ... ... ...".to_string()
        } else {
            prose(&mut rng, Lang::En)
        };
        docs.push(Document::new(id, Lang::En, text));
    }
    docs
}

pub fn write_corpus(dir: &Path, name: &str, docs: &[Document]) -> PathBuf {
    let path = dir.join(name);
    write_all(&path, docs).unwrap();
    path
}

/// Echo backend, translation on, no retry sleeps. `extra` goes first and
/// must not repeat those sections.
pub fn echo_config(extra: &str) -> PipelineConfig {
    let base = "[backend]\nkind = \"echo\"\n[backend.retry]\ninitial_backoff_ms = 0\n[translate]\nenabled = true\n";
    PipelineConfig::from_toml(&format!("{extra}\n{base}"), Vec::new()).unwrap()
}

const WORDS: &[&str] = &[
    "river",
    "stone",
    "light",
    "garden",
    "window",
    "table",
    "winter",
    "music",
    "paper",
    "bridge",
    "forest",
    "engine",
    "market",
    "silver",
    "planet",
    "letter",
    "harbor",
    "village",
    "mountain",
    "teacher",
    "question",
    "morning",
    "evening",
    "station",
    "picture",
    "history",
    "kitchen",
    "yellow",
    "quiet",
    "simple",
    "modern",
    "careful",
    "bright",
    "heavy",
    "gentle",
    "distant",
    "walks",
    "builds",
    "carries",
    "watches",
    "follows",
    "opens",
    "remembers",
    "finds",
    "holds",
    "the",
    "and",
    "with",
    "under",
    "across",
    "before",
    "after",
    "into",
    "over",
    "near",
];

/// A document built from known sentences, so tests can compare the
/// segmenter's view against ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedDoc {
    pub text: String,
    pub sentences: Vec<String>,
    /// `breaks[i]`: a blank line separates sentence `i` and `i + 1`.
    pub breaks: Vec<bool>,
}

pub fn gen_sentence(rng: &mut impl Rng, words: usize, terminal: bool) -> String {
    let mut s = String::new();
    for i in 0..words {
        if i > 0 {
            s.push(' ');
        }
        let w = *WORDS.choose(rng).unwrap();
        if i == 0 {
            let mut c = w.chars();
            s.extend(c.next().unwrap().to_uppercase());
            s.push_str(c.as_str());
        } else {
            s.push_str(w);
            if rng.random_bool(0.05) && i + 1 < words {
                s.push(',');
            }
        }
    }
    if terminal {
        s.push_str([".", ".", ".", "!", "?", "…", ".\"", "!)"][rng.random_range(0..8)]);
    }
    s
}

/// 1–30 sentences of 1–40 words; now and then a sentence far over any
/// sensible chunk budget, a paragraph break, or an unfinished tail.
pub fn gen_document(rng: &mut impl Rng) -> GeneratedDoc {
    let n = rng.random_range(1..=30);
    let mut text = String::new();
    let mut sentences = Vec::with_capacity(n);
    let mut breaks = Vec::with_capacity(n);
    for i in 0..n {
        let words = if rng.random_bool(0.03) { rng.random_range(250..450) } else { rng.random_range(1..=40) };
        let terminal = i + 1 < n || rng.random_bool(0.8);
        let s = gen_sentence(rng, words, terminal);
        if i > 0 {
            let sep = ["\n\n", "\n\n\n", " ", " ", " ", "  ", "\n"][rng.random_range(0..7)];
            breaks.push(sep.matches('\n').count() >= 2);
            text.push_str(sep);
        }
        text.push_str(&s);
        sentences.push(s);
    }
    GeneratedDoc { text, sentences, breaks }
}

/// Words of a fresh random text; tokens are unique with overwhelming odds.
pub fn random_words(rng: &mut impl Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| format!("w{}", rng.random_range(0..1_000_000_000u32))).collect()
}

/// Two `words`-long texts sharing a prefix sized so that their word
/// 5-gram Jaccard similarity lands as close to `j` as integer counts allow.
pub fn planted_pair(rng: &mut impl Rng, j: f64, words: usize) -> (String, String) {
    let total = (words - 4) as f64;
    let shared = (2.0 * total * j / (1.0 + j)).round() as usize;
    let prefix = if shared == 0 { 0 } else { shared + 4 };
    let a = random_words(rng, words);
    let mut b = a[..prefix].to_vec();
    b.extend(random_words(rng, words - prefix));
    (a.join(" "), b.join(" "))
}

/// Independent shingle oracle: normalized word `n`-grams as strings.
pub fn shingle_set(text: &str, n: usize) -> std::collections::HashSet<String> {
    let cleaned: String = text.to_lowercase().chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.len() < n {
        return std::iter::once(words.join(" ")).collect();
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

pub fn exact_jaccard(a: &str, b: &str) -> f64 {
    let (x, y) = (shingle_set(a, 5), shingle_set(b, 5));
    let inter = x.intersection(&y).count();
    inter as f64 / (x.len() + y.len() - inter) as f64
}

/// Brute-force greedy chunking: each chunk takes the longest run of sentences
/// that crosses no paragraph break and whose summed count fits the limit, or
/// a lone sentence when even that does not fit.
pub fn chunk_oracle(counts: &[usize], breaks: &[bool], limit: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < counts.len() {
        let mut best = i + 1;
        for j in i + 2..=counts.len() {
            let crosses_break = (i..j - 1).any(|k| breaks[k]);
            let total: usize = counts[i..j].iter().sum();
            if !crosses_break && total <= limit {
                best = j;
            }
        }
        out.push((i..best).collect());
        i = best;
    }
    out
}

/// Naïve packing: one big vector, then fixed-size slices. Returns the full
/// sequences and the length of the dropped tail.
pub fn naive_pack(docs: &[Document], counter: &twp::TokenCounter, l: usize) -> (Vec<Vec<u32>>, usize) {
    let mut all = Vec::new();
    for d in docs {
        let ids = counter.encode(&d.text);
        if !ids.is_empty() {
            all.extend(ids);
            all.push(counter.eos_id());
        }
    }
    let seqs: Vec<Vec<u32>> = all.chunks_exact(l).map(<[u32]>::to_vec).collect();
    (seqs, all.len() % l)
}
