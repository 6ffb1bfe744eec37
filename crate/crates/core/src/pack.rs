//! EOS-separated fixed-length sequence packing.
//!
//! File layout (all integers little endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "TWPK"
//!      4     4  version (1)
//!      8     4  sequence length L
//!     12     4  bytes per token id (4)
//!     16     8  sequence count
//!     24     4  EOS id
//!     28     4  reserved (0)
//!     32     …  sequence_count × L u32 token ids
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TokenCounter};

pub const MAGIC: &[u8; 4] = b"TWPK";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 32;
pub const TOKEN_BYTES: u32 = 4;
pub const DEFAULT_SEQ_LEN: u32 = 2048;

/// Tokens consumed by one optimizer step.
pub fn tokens_per_batch(seq_len: u32, batch_size: u32) -> u64 {
    u64::from(seq_len) * u64::from(batch_size)
}

#[derive(Debug, thiserror::Error)]
pub enum PackError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("not a packed token file (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("unsupported token width {0} bytes")]
    BadDtype(u32),
    #[error("file is truncated: header promises {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("sequence length mismatch: file has {found}, expected {expected}")]
    SeqLenMismatch { expected: u32, found: u32 },
    #[error("sequence length must be at least 2, got {0}")]
    SeqLenTooSmall(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackHeader {
    pub version: u32,
    pub seq_len: u32,
    pub dtype_bytes: u32,
    pub sequence_count: u64,
    pub eos_id: u32,
}

impl PackHeader {
    pub fn to_bytes(&self) -> [u8; 32] {
        let mut b = [0u8; 32];
        b[0..4].copy_from_slice(MAGIC);
        b[4..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..12].copy_from_slice(&self.seq_len.to_le_bytes());
        b[12..16].copy_from_slice(&self.dtype_bytes.to_le_bytes());
        b[16..24].copy_from_slice(&self.sequence_count.to_le_bytes());
        b[24..28].copy_from_slice(&self.eos_id.to_le_bytes());
        b
    }

    pub fn parse(b: &[u8; 32]) -> Result<Self, PackError> {
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let magic: [u8; 4] = b[0..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(PackError::BadMagic(magic));
        }
        let h = Self {
            version: u32_at(4),
            seq_len: u32_at(8),
            dtype_bytes: u32_at(12),
            sequence_count: u64::from_le_bytes(b[16..24].try_into().unwrap()),
            eos_id: u32_at(24),
        };
        if h.version != VERSION {
            return Err(PackError::BadVersion(h.version));
        }
        if h.dtype_bytes != TOKEN_BYTES {
            return Err(PackError::BadDtype(h.dtype_bytes));
        }
        Ok(h)
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.sequence_count * u64::from(self.seq_len) * u64::from(self.dtype_bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackManifest {
    pub seq_len: u32,
    pub eos_id: u32,
    pub sequence_count: u64,
    pub documents: u64,
    pub total_doc_tokens: u64,
    pub eos_count: u64,
    pub dropped_remainder: u64,
    /// Documents that produced no tokens and were left out.
    pub skipped_empty_docs: u64,
    pub tokenizer_fingerprint: String,
}

impl PackManifest {
    /// `doc tokens + EOS = sequences × L + remainder`, remainder < L.
    pub fn identity_holds(&self) -> bool {
        self.total_doc_tokens + self.eos_count == self.sequence_count * u64::from(self.seq_len) + self.dropped_remainder
            && self.dropped_remainder < u64::from(self.seq_len)
    }
}

/// Streams documents into a packed file. Call [`PackWriter::finish`] to
/// patch the header.
pub struct PackWriter<W: Write + Seek> {
    out: W,
    seq_len: usize,
    pending: Vec<u32>,
    manifest: PackManifest,
}

impl<W: Write + Seek> PackWriter<W> {
    pub fn new(mut out: W, seq_len: u32, eos_id: u32, tokenizer_fingerprint: &str) -> io::Result<Self> {
        assert!(seq_len >= 2, "sequence length must be at least 2");
        let header = PackHeader { version: VERSION, seq_len, dtype_bytes: TOKEN_BYTES, sequence_count: 0, eos_id };
        out.write_all(&header.to_bytes())?;
        Ok(Self {
            out,
            seq_len: seq_len as usize,
            pending: Vec::with_capacity(seq_len as usize * 2),
            manifest: PackManifest {
                seq_len,
                eos_id,
                sequence_count: 0,
                documents: 0,
                total_doc_tokens: 0,
                eos_count: 0,
                dropped_remainder: 0,
                skipped_empty_docs: 0,
                tokenizer_fingerprint: tokenizer_fingerprint.to_string(),
            },
        })
    }

    /// Appends one document's tokens followed by EOS.
    pub fn push(&mut self, tokens: &[u32]) -> io::Result<()> {
        if tokens.is_empty() {
            self.manifest.skipped_empty_docs += 1;
            return Ok(());
        }
        self.manifest.documents += 1;
        self.manifest.total_doc_tokens += tokens.len() as u64;
        self.manifest.eos_count += 1;
        self.pending.extend_from_slice(tokens);
        self.pending.push(self.manifest.eos_id);
        let full = self.pending.len() / self.seq_len * self.seq_len;
        if full > 0 {
            let mut bytes = Vec::with_capacity(full * 4);
            for id in &self.pending[..full] {
                bytes.extend_from_slice(&id.to_le_bytes());
            }
            self.out.write_all(&bytes)?;
            self.manifest.sequence_count += (full / self.seq_len) as u64;
            self.pending.drain(..full);
        }
        Ok(())
    }

    /// Drops the partial tail, writes the final header and returns the
    /// manifest together with the underlying writer.
    pub fn finish(mut self) -> io::Result<(PackManifest, W)> {
        self.manifest.dropped_remainder = self.pending.len() as u64;
        let header = PackHeader {
            version: VERSION,
            seq_len: self.manifest.seq_len,
            dtype_bytes: TOKEN_BYTES,
            sequence_count: self.manifest.sequence_count,
            eos_id: self.manifest.eos_id,
        };
        self.out.seek(SeekFrom::Start(0))?;
        self.out.write_all(&header.to_bytes())?;
        self.out.seek(SeekFrom::End(0))?;
        self.out.flush()?;
        debug_assert!(self.manifest.identity_holds());
        Ok((self.manifest, self.out))
    }
}

/// Tokenizes `docs` (in parallel batches) and packs them into `path`.
pub fn pack_stream<I>(docs: I, counter: &TokenCounter, seq_len: u32, path: &Path) -> Result<PackManifest, PackError>
where
    I: IntoIterator<Item = Document>,
{
    if seq_len < 2 {
        return Err(PackError::SeqLenTooSmall(seq_len));
    }
    let io_err = |source| PackError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w =
        PackWriter::new(BufWriter::new(file), seq_len, counter.eos_id(), counter.fingerprint()).map_err(io_err)?;
    let mut docs = docs.into_iter().peekable();
    while docs.peek().is_some() {
        let batch: Vec<Document> = docs.by_ref().take(1024).collect();
        let encoded: Vec<Vec<u32>> = batch.par_iter().map(|d| counter.encode(&d.text)).collect();
        for ids in &encoded {
            w.push(ids).map_err(io_err)?;
        }
    }
    let (manifest, _) = w.finish().map_err(io_err)?;
    Ok(manifest)
}

pub struct PackReader {
    header: PackHeader,
    input: BufReader<File>,
    path: PathBuf,
}

impl PackReader {
    /// Opens and validates a packed file, including its length.
    pub fn open(path: &Path) -> Result<Self, PackError> {
        let io_err = |source| PackError::Io { path: path.to_path_buf(), source };
        let file = File::open(path).map_err(io_err)?;
        let actual = file.metadata().map_err(io_err)?.len();
        let mut input = BufReader::new(file);
        let mut buf = [0u8; 32];
        if actual < HEADER_LEN {
            return Err(PackError::Truncated { expected: HEADER_LEN, actual });
        }
        input.read_exact(&mut buf).map_err(io_err)?;
        let header = PackHeader::parse(&buf)?;
        if actual != header.file_len() {
            return Err(PackError::Truncated { expected: header.file_len(), actual });
        }
        Ok(Self { header, input, path: path.to_path_buf() })
    }

    pub fn header(&self) -> &PackHeader {
        &self.header
    }

    pub fn expect_seq_len(&self, expected: u32) -> Result<(), PackError> {
        if self.header.seq_len != expected {
            return Err(PackError::SeqLenMismatch { expected, found: self.header.seq_len });
        }
        Ok(())
    }

    /// Reads the next sequence, or `None` at the end.
    pub fn next_sequence(&mut self) -> Result<Option<Vec<u32>>, PackError> {
        let l = self.header.seq_len as usize;
        let mut bytes = vec![0u8; l * 4];
        match self.input.read_exact(&mut bytes) {
            Ok(()) => Ok(Some(bytes.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())),
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(None),
            Err(source) => Err(PackError::Io { path: self.path.clone(), source }),
        }
    }
}

/// First `n` sequences of a packed file. With `expected_seq_len`, a file
/// packed at a different length is an error.
pub fn unpack_inspect(path: &Path, n: usize, expected_seq_len: Option<u32>) -> Result<Vec<Vec<u32>>, PackError> {
    let mut r = PackReader::open(path)?;
    if let Some(l) = expected_seq_len {
        r.expect_seq_len(l)?;
    }
    let mut out = Vec::new();
    while out.len() < n {
        match r.next_sequence()? {
            Some(s) => out.push(s),
            None => break,
        }
    }
    Ok(out)
}
