use serde::{Deserialize, Serialize};

use crate::lang::Lang;

/// One corpus text. The unit every pipeline stage consumes and produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: Lang,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    /// Cached token count. Only trusted when the corpus header carries the
    /// fingerprint of the active tokenizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_count: Option<u64>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: Lang, text: impl Into<String>) -> Self {
        Self { id: id.into(), lang, text: text.into(), source: None, token_count: None }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}
