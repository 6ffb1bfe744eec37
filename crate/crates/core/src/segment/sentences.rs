use std::collections::{HashMap, HashSet};
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use crate::lang::Lang;

const TERMINALS: &[char] = &['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '\'', '”', '’', '»', ')', ']', '}', '“'];
const OPENERS: &[char] = &['"', '\'', '“', '‘', '«', '(', '[', '{', '¡', '¿', '„'];

const BUNDLED: [(Lang, &str); 4] = [
    (Lang::En, include_str!("../../data/abbreviations/en.txt")),
    (Lang::Fr, include_str!("../../data/abbreviations/fr.txt")),
    (Lang::De, include_str!("../../data/abbreviations/de.txt")),
    (Lang::Es, include_str!("../../data/abbreviations/es.txt")),
];

/// A sentence borrowed from its parent text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    /// Byte range in the parent text; `&parent[span] == text`.
    pub span: Range<usize>,
    /// Ends with `. ! ? …`, optionally followed by closing quotes/brackets.
    pub terminal: bool,
}

/// Rule-based sentence splitter with per-language abbreviation lists.
#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    abbreviations: HashMap<Lang, HashSet<String>>,
}

impl Segmenter {
    /// Segmenter using the abbreviation lists shipped with the crate.
    pub fn bundled() -> Self {
        let mut s = Self::default();
        for (lang, list) in BUNDLED {
            s.set_abbreviations(lang, parse_list(list));
        }
        s
    }

    /// Loads `<dir>/<code>.txt` for each target language, falling back to the
    /// bundled list for files that do not exist.
    pub fn from_dir(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut s = Self::bundled();
        for lang in Lang::TARGETS {
            let path = dir.as_ref().join(format!("{}.txt", lang.code()));
            match fs::read_to_string(&path) {
                Ok(text) => s.set_abbreviations(lang, parse_list(&text)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        Ok(s)
    }

    pub fn set_abbreviations<I, S>(&mut self, lang: Lang, abbrevs: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set = abbrevs
            .into_iter()
            .map(|a| a.as_ref().trim().trim_end_matches('.').to_lowercase())
            .filter(|a| !a.is_empty())
            .collect();
        self.abbreviations.insert(lang, set);
    }

    fn is_abbreviation(&self, lang: Lang, word: &str) -> bool {
        let lang = if lang == Lang::Other { Lang::En } else { lang };
        self.abbreviations.get(&lang).is_some_and(|set| set.contains(&word.to_lowercase()))
    }

    pub fn split<'a>(&self, text: &'a str, lang: Lang) -> Vec<Sentence<'a>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let at = |i: usize| chars.get(i).map_or(text.len(), |c| c.0);
        let mut out = Vec::new();
        let mut start: Option<usize> = None;
        let mut i = 0;

        let close = |out: &mut Vec<Sentence<'a>>, s: usize, e: usize| {
            let t = &text[s..e];
            out.push(Sentence { text: t, span: s..e, terminal: ends_terminal(t) });
        };

        while i < chars.len() {
            let c = chars[i].1;
            if c.is_whitespace() {
                let mut j = i;
                let mut newlines = 0;
                while j < chars.len() && chars[j].1.is_whitespace() {
                    newlines += usize::from(chars[j].1 == '\n');
                    j += 1;
                }
                if newlines >= 2 {
                    if let Some(s) = start.take() {
                        close(&mut out, at(s), at(i));
                    }
                }
                i = j;
                continue;
            }
            if start.is_none() {
                start = Some(i);
            }
            if !TERMINALS.contains(&c) {
                i += 1;
                continue;
            }
            let run_start = i;
            let mut j = i;
            while j < chars.len() && TERMINALS.contains(&chars[j].1) {
                j += 1;
            }
            let run_end = j;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            if j < chars.len() && !chars[j].1.is_whitespace() {
                // "3.14", "e.g.x", "?!a": not followed by space
                i = j;
                continue;
            }
            let s = start.expect("sentence started");
            let boundary = j == chars.len() || self.is_boundary(text, &chars, s, run_start, run_end, j, lang);
            if boundary {
                close(&mut out, at(s), at(j));
                start = None;
            }
            i = j;
        }
        if let Some(s) = start {
            let end = text.trim_end().len();
            close(&mut out, at(s), end);
        }
        out
    }

    /// Decides whether a terminal run followed by whitespace ends a sentence.
    /// `s` is the sentence start, `[rs, re)` the terminal run, `after` the
    /// index past any closers.
    #[allow(clippy::too_many_arguments)]
    fn is_boundary(
        &self,
        text: &str,
        chars: &[(usize, char)],
        s: usize,
        rs: usize,
        re: usize,
        after: usize,
        lang: Lang,
    ) -> bool {
        let run = &chars[rs..re];
        if run.iter().any(|(_, c)| *c == '!' || *c == '?') {
            return true;
        }
        // whitespace after the run; a blank line always splits
        let mut k = after;
        let mut newlines = 0;
        while k < chars.len() && chars[k].1.is_whitespace() {
            newlines += usize::from(chars[k].1 == '\n');
            k += 1;
        }
        if newlines >= 2 {
            return true;
        }
        let mut n = k;
        while n < chars.len() && OPENERS.contains(&chars[n].1) {
            n += 1;
        }
        if n < chars.len() && chars[n].1.is_lowercase() {
            return false;
        }
        if re - rs != 1 || run[0].1 != '.' || after != re {
            return true;
        }

        let wb = token_start(chars, s, rs);
        let word = text[chars[wb].0..chars[rs].0].trim_start_matches(OPENERS);
        if self.is_abbreviation(lang, word) {
            return false;
        }
        if is_initial(word) {
            let next = next_word(text, chars, k);
            let prev = prev_word(text, chars, s, wb);
            if next.is_some_and(|w| is_initial(w.strip_suffix('.').unwrap_or("")) && w.ends_with('.'))
                || prev.is_some_and(|w| w.ends_with('.') && is_initial(&w[..w.len() - 1]))
            {
                return false;
            }
        }
        if lang == Lang::De && (1..=2).contains(&word.len()) && word.bytes().all(|b| b.is_ascii_digit()) {
            // ordinal: "3. Oktober"
            return false;
        }
        true
    }
}

fn parse_list(text: &str) -> Vec<&str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect()
}

fn ends_terminal(s: &str) -> bool {
    s.trim_end_matches(CLOSERS).chars().next_back().is_some_and(|c| TERMINALS.contains(&c))
}

/// Char index where the whitespace-delimited token ending at `end` starts.
fn token_start(chars: &[(usize, char)], s: usize, end: usize) -> usize {
    let mut b = end;
    while b > s && !chars[b - 1].1.is_whitespace() {
        b -= 1;
    }
    b
}

fn prev_word<'a>(text: &'a str, chars: &[(usize, char)], s: usize, word_start: usize) -> Option<&'a str> {
    let mut e = word_start;
    while e > s && chars[e - 1].1.is_whitespace() {
        e -= 1;
    }
    (e > s).then(|| {
        let b = token_start(chars, s, e);
        let end = chars.get(e).map_or(text.len(), |c| c.0);
        text[chars[b].0..end].trim_start_matches(OPENERS)
    })
}

fn next_word<'a>(text: &'a str, chars: &[(usize, char)], k: usize) -> Option<&'a str> {
    let start = chars.get(k)?.0;
    let end = chars[k..].iter().find(|(_, c)| c.is_whitespace()).map_or(text.len(), |(b, _)| *b);
    Some(&text[start..end])
}

fn is_initial(word: &str) -> bool {
    let mut it = word.chars();
    matches!((it.next(), it.next()), (Some(c), None) if c.is_uppercase())
}

fn bundled() -> &'static Segmenter {
    static SEG: OnceLock<Segmenter> = OnceLock::new();
    SEG.get_or_init(Segmenter::bundled)
}

/// Splits with the bundled abbreviation lists.
pub fn split_sentences(text: &str, lang: Lang) -> Vec<Sentence<'_>> {
    bundled().split(text, lang)
}
