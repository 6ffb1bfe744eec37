//! Streaming JSONL corpus I/O.
//!
//! One document per line: `{"id", "lang", "text", "source"?, "token_count"?}`.
//! An optional first line `{"_header": true, "tokenizer_fingerprint": "..."}`
//! records which tokenizer produced any cached token counts.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Document;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer_fingerprint: Option<String>,
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    _header: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    tokenizer_fingerprint: Option<&'a str>,
}

/// A line that could not be turned into a [`Document`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: RecordError,
    },
}

impl CorpusError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CorpusError::Io { path: path.into(), source }
    }
}

/// Single-cursor reader yielding documents in file order.
///
/// Malformed lines and duplicate ids come out as `Err(RecordError)` items;
/// the caller decides whether to skip them or abort.
pub struct CorpusReader<R> {
    input: R,
    line_no: usize,
    header: Option<CorpusHeader>,
    pending: Option<Result<Document, RecordError>>,
    seen_ids: HashSet<String>,
    buf: Vec<u8>,
}

impl CorpusReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(Self::new(BufReader::new(file)))
    }
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(input: R) -> Self {
        let mut reader =
            Self { input, line_no: 0, header: None, pending: None, seen_ids: HashSet::new(), buf: Vec::new() };
        reader.prime();
        reader
    }

    /// The header line, if the corpus starts with one.
    pub fn header(&self) -> Option<&CorpusHeader> {
        self.header.as_ref()
    }

    /// Drops malformed records into `errors` and yields only documents.
    pub fn lenient<'e>(self, errors: &'e mut Vec<RecordError>) -> impl Iterator<Item = Document> + 'e
    where
        R: 'e,
    {
        self.filter_map(move |item| match item {
            Ok(doc) => Some(doc),
            Err(err) => {
                log::warn!("skipping malformed record: {err}");
                errors.push(err);
                None
            }
        })
    }

    // Peeks the first non-blank line so the header is known before iteration.
    fn prime(&mut self) {
        match self.next_raw() {
            Some(Ok(line)) => match parse_header(&line) {
                Some(header) => self.header = Some(header),
                None => self.pending = Some(self.parse_document(&line)),
            },
            Some(Err(e)) => self.pending = Some(Err(e)),
            None => {}
        }
    }

    fn next_raw(&mut self) -> Option<Result<String, RecordError>> {
        loop {
            self.buf.clear();
            match self.input.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    let line = match std::str::from_utf8(&self.buf) {
                        Ok(s) => s.trim_end_matches(['\n', '\r']),
                        Err(e) => {
                            return Some(Err(RecordError {
                                line: self.line_no,
                                message: format!("invalid UTF-8: {e}"),
                            }))
                        }
                    };
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(Ok(line.to_string()));
                }
                Err(e) => {
                    self.line_no += 1;
                    return Some(Err(RecordError { line: self.line_no, message: format!("read error: {e}") }));
                }
            }
        }
    }

    fn parse_document(&mut self, line: &str) -> Result<Document, RecordError> {
        let doc: Document = serde_json::from_str(line).map_err(|e| RecordError {
            line: self.line_no,
            message: if line.contains("\"_header\"") {
                "header line is only allowed as the first line".to_string()
            } else {
                e.to_string()
            },
        })?;
        if doc.id.is_empty() {
            return Err(RecordError { line: self.line_no, message: "empty document id".to_string() });
        }
        if !self.seen_ids.insert(doc.id.clone()) {
            return Err(RecordError { line: self.line_no, message: format!("duplicate document id `{}`", doc.id) });
        }
        Ok(doc)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Document, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(item) = self.pending.take() {
            return Some(item);
        }
        match self.next_raw()? {
            Ok(line) => Some(self.parse_document(&line)),
            Err(e) => Some(Err(e)),
        }
    }
}

fn parse_header(line: &str) -> Option<CorpusHeader> {
    if !line.contains("\"_header\"") {
        return None;
    }
    let value: serde_json::Value = serde_json::from_str(line).ok()?;
    if value.get("_header")?.as_bool()? {
        Some(CorpusHeader {
            tokenizer_fingerprint: value.get("tokenizer_fingerprint").and_then(|v| v.as_str()).map(str::to_string),
        })
    } else {
        None
    }
}

/// Reads a whole corpus into memory. In strict mode the first malformed
/// record aborts; otherwise malformed records are returned alongside.
pub fn read_all(path: impl AsRef<Path>, strict: bool) -> Result<(Vec<Document>, Vec<RecordError>), CorpusError> {
    let path = path.as_ref();
    let reader = CorpusReader::open(path)?;
    let mut docs = Vec::new();
    let mut errors = Vec::new();
    for item in reader {
        match item {
            Ok(doc) => docs.push(doc),
            Err(source) if strict => return Err(CorpusError::Malformed { path: path.to_path_buf(), source }),
            Err(e) => errors.push(e),
        }
    }
    Ok((docs, errors))
}

/// Buffered JSONL writer.
pub struct CorpusWriter<W: Write> {
    out: W,
    written: u64,
}

impl CorpusWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: Option<&CorpusHeader>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
        let mut writer = Self::new(BufWriter::new(file));
        if let Some(header) = header {
            writer.write_header(header).map_err(|e| CorpusError::io(path, e))?;
        }
        Ok(writer)
    }
}

impl<W: Write> CorpusWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, written: 0 }
    }

    pub fn write_header(&mut self, header: &CorpusHeader) -> io::Result<()> {
        let line = HeaderLine { _header: true, tokenizer_fingerprint: header.tokenizer_fingerprint.as_deref() };
        serde_json::to_writer(&mut self.out, &line)?;
        self.out.write_all(b"\n")
    }

    pub fn write(&mut self, doc: &Document) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, doc)?;
        self.out.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Writes `docs` to `path`, returning the number written.
pub fn write_all<'a>(path: impl AsRef<Path>, docs: impl IntoIterator<Item = &'a Document>) -> Result<u64, CorpusError> {
    let path = path.as_ref();
    let mut writer = CorpusWriter::create(path, None)?;
    for doc in docs {
        writer.write(doc).map_err(|e| CorpusError::io(path, e))?;
    }
    let n = writer.written();
    writer.finish().map_err(|e| CorpusError::io(path, e))?;
    Ok(n)
}

/// Appends one serializable record as a JSON line; returns bytes written.
pub fn append_json_line<T: Serialize + ?Sized>(out: &mut impl Write, record: &T) -> io::Result<u64> {
    let mut line = serde_json::to_vec(record)?;
    line.push(b'\n');
    out.write_all(&line)?;
    Ok(line.len() as u64)
}
