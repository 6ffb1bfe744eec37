//! Token counting and encoding.
//!
//! Two modes: a GPT-2 style byte-level BPE loaded from `vocab.json` +
//! `merges.txt`, and a whitespace fallback that treats every maximal run of
//! non-whitespace as one token.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

const BUNDLED_VOCAB: &str = include_str!("../../data/tokenizer/vocab.json");
const BUNDLED_MERGES: &str = include_str!("../../data/tokenizer/merges.txt");

/// End-of-text token of the bundled vocabulary.
pub const DEFAULT_EOS_TOKEN: &str = "<|endoftext|>";

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary is not a JSON object of token -> id: {0}")]
    Vocab(String),
    #[error("merges line {line}: expected two space-separated symbols")]
    Merges { line: usize },
    #[error("EOS token `{0}` is not in the vocabulary")]
    MissingEos(String),
    #[error("vocabulary lacks byte symbol `{0}`")]
    MissingByte(char),
}

#[derive(Debug, Clone)]
enum Mode {
    Bpe(Box<Bpe>),
    Whitespace,
}

/// Deterministic text → token-id mapping with a reserved EOS id.
#[derive(Debug, Clone)]
pub struct TokenCounter {
    mode: Mode,
    eos_id: u32,
    fingerprint: String,
}

impl TokenCounter {
    /// Whitespace fallback. Ids are a stable hash of the word, never equal to
    /// `eos_id`.
    pub fn whitespace(eos_id: u32) -> Self {
        let fingerprint = fingerprint(&[b"whitespace", &eos_id.to_le_bytes()]);
        Self { mode: Mode::Whitespace, eos_id, fingerprint }
    }

    /// The byte-level BPE vocabulary shipped with the crate.
    pub fn bundled_bpe() -> Self {
        Self::bpe_from_str(BUNDLED_VOCAB, BUNDLED_MERGES, DEFAULT_EOS_TOKEN).expect("bundled tokenizer files are valid")
    }

    pub fn bpe_from_files(
        vocab: impl AsRef<Path>,
        merges: impl AsRef<Path>,
        eos_token: &str,
    ) -> Result<Self, TokenizerError> {
        let read =
            |p: &Path| fs::read_to_string(p).map_err(|source| TokenizerError::Io { path: p.to_path_buf(), source });
        let vocab = read(vocab.as_ref())?;
        let merges = read(merges.as_ref())?;
        Self::bpe_from_str(&vocab, &merges, eos_token)
    }

    pub fn bpe_from_str(vocab: &str, merges: &str, eos_token: &str) -> Result<Self, TokenizerError> {
        let bpe = Bpe::parse(vocab, merges)?;
        let eos_id = *bpe.vocab.get(eos_token).ok_or_else(|| TokenizerError::MissingEos(eos_token.to_string()))?;
        let fingerprint = fingerprint(&[b"bpe", vocab.as_bytes(), merges.as_bytes(), eos_token.as_bytes()]);
        Ok(Self { mode: Mode::Bpe(Box::new(bpe)), eos_id, fingerprint })
    }

    pub fn eos_id(&self) -> u32 {
        self.eos_id
    }

    /// Short hex digest identifying tokenizer files and mode.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn is_bpe(&self) -> bool {
        matches!(self.mode, Mode::Bpe(_))
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        match &self.mode {
            Mode::Whitespace => text.split_whitespace().map(|w| word_id(w, self.eos_id)).collect(),
            Mode::Bpe(bpe) => {
                let mut ids = Vec::new();
                for piece in pretokenize(text) {
                    bpe.encode_piece(piece, &mut ids);
                }
                ids
            }
        }
    }

    pub fn count(&self, text: &str) -> usize {
        match &self.mode {
            Mode::Whitespace => text.split_whitespace().count(),
            Mode::Bpe(_) => self.encode(text).len(),
        }
    }
}

fn fingerprint(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn word_id(word: &str, eos_id: u32) -> u32 {
    // FNV-1a, folded into 31 bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in word.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let id = (h ^ (h >> 31)) as u32 & 0x7fff_ffff;
    if id == eos_id {
        id ^ 1
    } else {
        id
    }
}

#[derive(Debug, Clone)]
struct Bpe {
    vocab: HashMap<String, u32>,
    ranks: HashMap<(String, String), usize>,
    byte_symbols: [char; 256],
}

impl Bpe {
    fn parse(vocab: &str, merges: &str) -> Result<Self, TokenizerError> {
        let vocab: HashMap<String, u32> =
            serde_json::from_str(vocab).map_err(|e| TokenizerError::Vocab(e.to_string()))?;
        let mut ranks = HashMap::new();
        let mut rank = 0;
        for (i, line) in merges.lines().enumerate() {
            if line.starts_with("#version") || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    ranks.entry((a.to_string(), b.to_string())).or_insert(rank);
                    rank += 1;
                }
                _ => return Err(TokenizerError::Merges { line: i + 1 }),
            }
        }
        let byte_symbols = byte_symbols();
        for c in byte_symbols {
            if !vocab.contains_key(c.encode_utf8(&mut [0; 4]) as &str) {
                return Err(TokenizerError::MissingByte(c));
            }
        }
        Ok(Self { vocab, ranks, byte_symbols })
    }

    fn encode_piece(&self, piece: &str, out: &mut Vec<u32>) {
        let mut symbols: Vec<String> = piece.bytes().map(|b| self.byte_symbols[b as usize].to_string()).collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| self.ranks.get(&(w[0].clone(), w[1].clone())).map(|r| (*r, i)))
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && self.ranks.get(&(symbols[i].clone(), symbols[i + 1].clone())) == Some(&rank)
                {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        for s in symbols {
            match self.vocab.get(&s) {
                Some(id) => out.push(*id),
                // merged symbol missing from vocab: fall back to its bytes
                None => out.extend(s.chars().map(|c| self.vocab[c.encode_utf8(&mut [0; 4]) as &str])),
            }
        }
    }
}

/// GPT-2 byte → printable unicode symbol table.
fn byte_symbols() -> [char; 256] {
    let mut table = ['\0'; 256];
    let mut extra = 0u32;
    for b in 0..=255u8 {
        let printable = matches!(b, b'!'..=b'~' | 0xa1..=0xac | 0xae..=0xff);
        table[b as usize] = if printable {
            char::from(b)
        } else {
            let c = char::from_u32(256 + extra).unwrap();
            extra += 1;
            c
        };
    }
    table
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Other,
    Space,
}

fn class(c: char) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else {
        Class::Other
    }
}

const CONTRACTIONS: [&str; 7] = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d"];

/// Splits text the way the GPT-2 pattern
/// `'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+`
/// does, without a regex engine.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |(b, _)| *b);
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c == '\'' {
            if let Some(con) = CONTRACTIONS.iter().find(|con| text[start..].starts_with(*con)) {
                out.push(&text[start..start + con.len()]);
                i += con.chars().count();
                continue;
            }
        }
        let cls = class(c);
        if cls != Class::Space || (c == ' ' && chars.get(i + 1).is_some_and(|(_, n)| class(*n) != Class::Space)) {
            // optional single leading space, then a run of one class
            let mut j = i;
            if c == ' ' {
                j += 1;
            }
            let run = class(chars[j].1);
            while j < chars.len() && class(chars[j].1) == run {
                j += 1;
            }
            out.push(&text[start..byte_at(j)]);
            i = j;
            continue;
        }
        // whitespace run; leave its last char to the following token if any
        let mut j = i;
        while j < chars.len() && class(chars[j].1) == Class::Space {
            j += 1;
        }
        if j < chars.len() && j - i > 1 {
            j -= 1;
        }
        out.push(&text[start..byte_at(j)]);
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_counts_runs() {
        let t = TokenCounter::whitespace(0);
        assert_eq!(t.count(""), 0);
        assert_eq!(t.count("hello world"), 2);
        assert_eq!(t.count("  a\tb\n\nc  "), 3);
        assert!(t.encode("x y z").iter().all(|&id| id != 0));
    }

    #[test]
    fn pretokenize_matches_gpt2_pattern() {
        assert_eq!(pretokenize("Hello world"), ["Hello", " world"]);
        assert_eq!(pretokenize("it's 2024!"), ["it", "'s", " 2024", "!"]);
        assert_eq!(pretokenize("a  b"), ["a", " ", " b"]);
        assert_eq!(pretokenize("a\n\nB"), ["a", "\n", "\n", "B"]);
        assert_eq!(pretokenize("end.  "), ["end", ".", "  "]);
        assert_eq!(pretokenize(" ünï"), [" ünï"]);
        assert_eq!(pretokenize("x ..."), ["x", " ..."]);
    }

    #[test]
    fn bundled_bpe_roundtrips_through_vocab() {
        let t = TokenCounter::bundled_bpe();
        assert_eq!(t.count(""), 0);
        let ids = t.encode("The water cycle describes how water moves.");
        assert!(!ids.is_empty());
        assert!(ids.len() < 15, "common words should merge: {ids:?}");
        assert!(!ids.contains(&t.eos_id()));
        // bytes outside the training data still encode
        assert!(t.count("日本語 ✓") > 0);
    }

    #[test]
    fn fingerprints_distinguish_modes() {
        assert_ne!(TokenCounter::whitespace(0).fingerprint(), TokenCounter::bundled_bpe().fingerprint());
        assert_eq!(TokenCounter::bundled_bpe().fingerprint().len(), 16);
    }
}
