use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, CompletionBackend, CompletionRequest, RetryPolicy};
use super::prompt::{PromptTemplate, TemplateError};
use super::trim::trim_incomplete;
use crate::corpus::{Document, TokenCounter};
use crate::lang::Lang;
use crate::segment::{ChunkConfig, Chunker, Segmenter};

/// Separator between translated chunks in the output document.
pub const CHUNK_JOIN: &str = "\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkStatus {
    Ok,
    Failed,
    /// Backend answered but nothing survived trimming.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub doc_id: String,
    pub target: Lang,
    pub chunk_index: usize,
    pub raw: Option<String>,
    pub trimmed: String,
    pub dropped_sentence_count: usize,
    pub status: ChunkStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentTranslation {
    /// `None` when any chunk failed after retries.
    pub document: Option<Document>,
    pub records: Vec<TranslationRecord>,
}

impl DocumentTranslation {
    pub fn is_ok(&self) -> bool {
        self.document.is_some()
    }

    pub fn dropped_sentences(&self) -> usize {
        self.records.iter().map(|r| r.dropped_sentence_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    /// `None` means twice the chunk limit.
    pub max_tokens: Option<u32>,
    pub temperature: f32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { max_tokens: None, temperature: 0.0 }
    }
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 32;

/// Chunk → prompt → backend → trim → reassemble.
pub struct Translator<'a> {
    pub backend: &'a dyn CompletionBackend,
    pub template: &'a PromptTemplate,
    pub segmenter: &'a Segmenter,
    pub counter: &'a TokenCounter,
    pub chunking: ChunkConfig,
    pub params: GenerationParams,
    pub retry: RetryPolicy,
    /// Upper bound on concurrent backend calls.
    pub max_in_flight: usize,
}

struct Job<'d> {
    doc: usize,
    chunk: usize,
    text: &'d str,
    prompt: String,
}

impl<'a> Translator<'a> {
    pub fn translate_document(&self, doc: &Document, tgt: Lang) -> Result<DocumentTranslation, TemplateError> {
        Ok(self.translate_batch(std::slice::from_ref(doc), tgt)?.remove(0))
    }

    /// Translates several documents into `tgt`, sharing one bounded pool of
    /// backend calls. Output order matches `docs`.
    pub fn translate_batch(&self, docs: &[Document], tgt: Lang) -> Result<Vec<DocumentTranslation>, TemplateError> {
        let chunker = Chunker::new(self.segmenter, self.counter, self.chunking);
        let mut jobs = Vec::new();
        let mut chunk_counts = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let chunks = chunker.chunk(&doc.text, doc.lang);
            chunk_counts.push(chunks.len());
            for c in chunks {
                jobs.push(Job {
                    doc: d,
                    chunk: c.index,
                    text: c.text,
                    prompt: self.template.render(c.text, doc.lang, tgt)?,
                });
            }
        }

        let max_tokens =
            self.params.max_tokens.unwrap_or_else(|| (2 * self.chunking.limit).min(u32::MAX as usize) as u32);
        let results: Vec<Mutex<Option<Result<String, BackendError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.max_in_flight.max(1).min(jobs.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let req = CompletionRequest {
                        prompt: &job.prompt,
                        source_text: job.text,
                        max_tokens,
                        temperature: self.params.temperature,
                        seed: i as u64,
                    };
                    let r = self.retry.call(self.backend, &req);
                    *results[i].lock().unwrap() = Some(r);
                });
            }
        });

        let mut out: Vec<DocumentTranslation> = docs
            .iter()
            .zip(&chunk_counts)
            .map(|(_, &n)| DocumentTranslation { document: None, records: Vec::with_capacity(n) })
            .collect();
        for (job, result) in jobs.iter().zip(results) {
            let doc = &docs[job.doc];
            let record = match result.into_inner().unwrap().expect("every job ran") {
                Ok(raw) => {
                    let t = trim_incomplete(self.segmenter, &raw, tgt);
                    TranslationRecord {
                        doc_id: doc.id.clone(),
                        target: tgt,
                        chunk_index: job.chunk,
                        status: if t.text.is_empty() { ChunkStatus::Empty } else { ChunkStatus::Ok },
                        raw: Some(raw),
                        trimmed: t.text,
                        dropped_sentence_count: t.dropped,
                        error: None,
                    }
                }
                Err(e) => TranslationRecord {
                    doc_id: doc.id.clone(),
                    target: tgt,
                    chunk_index: job.chunk,
                    raw: None,
                    trimmed: String::new(),
                    dropped_sentence_count: 0,
                    status: ChunkStatus::Failed,
                    error: Some(e.to_string()),
                },
            };
            out[job.doc].records.push(record);
        }
        for (dt, doc) in out.iter_mut().zip(docs) {
            if dt.records.iter().any(|r| r.status == ChunkStatus::Failed) {
                continue;
            }
            let text = dt
                .records
                .iter()
                .filter(|r| r.status == ChunkStatus::Ok)
                .map(|r| r.trimmed.as_str())
                .collect::<Vec<_>>()
                .join(CHUNK_JOIN);
            let mut translated = Document::new(translated_id(&doc.id, tgt), tgt, text);
            translated.source = Some(doc.id.clone());
            dt.document = Some(translated);
        }
        Ok(out)
    }
}

pub fn translated_id(src_id: &str, tgt: Lang) -> String {
    format!("{src_id}:{tgt}")
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::AtomicUsize;

    use super::*;
    use crate::translate::backend::{CipherBackend, EchoBackend, FnBackend};

    fn translator<'a>(
        backend: &'a dyn CompletionBackend,
        template: &'a PromptTemplate,
        segmenter: &'a Segmenter,
        counter: &'a TokenCounter,
    ) -> Translator<'a> {
        Translator {
            backend,
            template,
            segmenter,
            counter,
            chunking: ChunkConfig { limit: 300, paragraph_breaks: true },
            params: GenerationParams::default(),
            retry: RetryPolicy::no_backoff(3),
            max_in_flight: 4,
        }
    }

    /// 25 sentences × 40 tokens; greedy packing gives 7, 7, 7, 4.
    fn thousand_token_doc() -> Document {
        let sentence = {
            let mut w = vec!["word"; 39];
            w.insert(0, "Every");
            format!("{}.", w.join(" "))
        };
        Document::new("d1", Lang::En, vec![sentence; 25].join(" "))
    }

    #[test]
    fn echo_reproduces_text_modulo_separator() {
        let (seg, counter, tpl) = (Segmenter::bundled(), TokenCounter::whitespace(0), PromptTemplate::default());
        let doc = thousand_token_doc();
        let t = translator(&EchoBackend, &tpl, &seg, &counter);
        let out = t.translate_document(&doc, Lang::Fr).unwrap();
        let translated = out.document.unwrap();
        assert_eq!(translated.id, "d1:fr");
        assert_eq!(translated.lang, Lang::Fr);
        assert_eq!(translated.text.replace('\n', " "), doc.text);
        assert_eq!(out.records.len(), 4);
    }

    #[test]
    fn one_backend_call_per_chunk() {
        let (seg, counter, tpl) = (Segmenter::bundled(), TokenCounter::whitespace(0), PromptTemplate::default());
        let calls = AtomicUsize::new(0);
        let backend = FnBackend(|r: &CompletionRequest<'_>| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(r.source_text.to_string())
        });
        let out =
            translator(&backend, &tpl, &seg, &counter).translate_document(&thousand_token_doc(), Lang::De).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 4);
        let sizes: Vec<usize> = out.records.iter().map(|r| r.trimmed.matches('.').count()).collect();
        assert_eq!(sizes, [7, 7, 7, 4]);
    }

    #[test]
    fn cipher_round_trip() {
        let (seg, counter, tpl) = (Segmenter::bundled(), TokenCounter::whitespace(0), PromptTemplate::default());
        let doc = Document::new("x", Lang::En, "First sentence here. Second one!\n\nThird paragraph?");
        let out = translator(&CipherBackend, &tpl, &seg, &counter).translate_document(&doc, Lang::Es).unwrap();
        let decoded = CipherBackend::decode(&out.document.unwrap().text);
        assert_eq!(decoded, "First sentence here. Second one!\nThird paragraph?");
    }

    #[test]
    fn failure_marks_document_failed() {
        let (seg, counter, tpl) = (Segmenter::bundled(), TokenCounter::whitespace(0), PromptTemplate::default());
        let backend = FnBackend(|r: &CompletionRequest<'_>| {
            if r.source_text.contains("poison") {
                Err(BackendError::Transport("boom".into()))
            } else {
                Ok(r.source_text.to_string())
            }
        });
        let docs = [Document::new("a", Lang::En, "Fine text."), Document::new("b", Lang::En, "A poison pill.")];
        let out = translator(&backend, &tpl, &seg, &counter).translate_batch(&docs, Lang::Fr).unwrap();
        assert!(out[0].is_ok());
        assert!(!out[1].is_ok());
        assert_eq!(out[1].records[0].status, ChunkStatus::Failed);
        assert_eq!(out[1].records[0].error.as_deref(), Some("transport: boom"));
    }

    #[test]
    fn empty_chunks_are_recorded_and_skipped() {
        let (seg, counter, tpl) = (Segmenter::bundled(), TokenCounter::whitespace(0), PromptTemplate::default());
        let backend = FnBackend(|r: &CompletionRequest<'_>| {
            Ok(if r.source_text.starts_with("Drop") { "no stop".into() } else { r.source_text.to_string() })
        });
        let doc = Document::new("a", Lang::En, "Keep this.\n\nDrop this.\n\nKeep that.");
        let out = translator(&backend, &tpl, &seg, &counter).translate_document(&doc, Lang::Fr).unwrap();
        assert_eq!(out.document.as_ref().unwrap().text, "Keep this.\nKeep that.");
        assert_eq!(out.records[1].status, ChunkStatus::Empty);
        assert_eq!(out.dropped_sentences(), 1);
    }
}
