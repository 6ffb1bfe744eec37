use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lang::Lang;

pub const SLOT_SOURCE_TEXT: &str = "{SOURCE_TEXT}";
pub const SLOT_TARGET_LANGUAGE: &str = "{TARGET_LANGUAGE}";
pub const SLOT_SOURCE_LANGUAGE: &str = "{SOURCE_LANGUAGE}";

/// Generic instruction wording. It is a plausible reconstruction, not any
/// particular model's canonical prompt; override it in config.
pub const DEFAULT_INSTRUCTION: &str = "Translate the following {SOURCE_LANGUAGE} text into {TARGET_LANGUAGE}. \
     Reply with the translation only.\n\n{SOURCE_TEXT}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("{which}: missing slot {slot}")]
    MissingSlot { which: String, slot: &'static str },
    #[error("{which}: slot {slot} appears more than once")]
    RepeatedSlot { which: String, slot: &'static str },
    #[error("{which}: unknown slot `{slot}`")]
    UnknownSlot { which: String, slot: String },
    #[error("no prompt for target language `{0}`")]
    UnknownTarget(Lang),
    #[error("source and target language are both `{0}`")]
    SameLanguage(Lang),
}

/// Instruction-style prompt: `<open> <instruction> <close>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplate {
    pub wrapper_open: String,
    pub wrapper_close: String,
    pub instruction: String,
    /// Per-target replacements for `instruction`.
    pub overrides: BTreeMap<Lang, String>,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            wrapper_open: "[INST]".into(),
            wrapper_close: "[/INST]".into(),
            instruction: DEFAULT_INSTRUCTION.into(),
            overrides: BTreeMap::new(),
        }
    }
}

impl PromptTemplate {
    /// Checks every instruction: `{SOURCE_TEXT}` and `{TARGET_LANGUAGE}`
    /// exactly once, `{SOURCE_LANGUAGE}` at most once, nothing else.
    pub fn validate(&self) -> Result<(), TemplateError> {
        check_instruction("instruction", &self.instruction)?;
        for (lang, text) in &self.overrides {
            if !lang.is_target() {
                return Err(TemplateError::UnknownTarget(*lang));
            }
            check_instruction(&format!("overrides.{lang}"), text)?;
        }
        Ok(())
    }

    pub fn instruction_for(&self, tgt: Lang) -> &str {
        self.overrides.get(&tgt).unwrap_or(&self.instruction)
    }

    pub fn render(&self, source_text: &str, src: Lang, tgt: Lang) -> Result<String, TemplateError> {
        if src == tgt {
            return Err(TemplateError::SameLanguage(src));
        }
        let tgt_name = tgt.name().ok_or(TemplateError::UnknownTarget(tgt))?;
        let src_name = src.name().unwrap_or("source");
        let body = substitute(self.instruction_for(tgt), |slot| match slot {
            SLOT_SOURCE_TEXT => Some(source_text),
            SLOT_TARGET_LANGUAGE => Some(tgt_name),
            SLOT_SOURCE_LANGUAGE => Some(src_name),
            _ => None,
        });
        Ok(format!("{} {} {}", self.wrapper_open, body, self.wrapper_close))
    }
}

fn slots(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.match_indices('{').filter_map(move |(i, _)| {
        let rest = &text[i..];
        let end = rest.find('}')?;
        let name = &rest[1..end];
        (!name.is_empty() && name.bytes().all(|b| b.is_ascii_uppercase() || b == b'_')).then(|| (i, &rest[..=end]))
    })
}

fn check_instruction(which: &str, text: &str) -> Result<(), TemplateError> {
    let mut counts = [0usize; 3];
    for (_, slot) in slots(text) {
        match slot {
            SLOT_SOURCE_TEXT => counts[0] += 1,
            SLOT_TARGET_LANGUAGE => counts[1] += 1,
            SLOT_SOURCE_LANGUAGE => counts[2] += 1,
            other => return Err(TemplateError::UnknownSlot { which: which.into(), slot: other.into() }),
        }
    }
    let names = [SLOT_SOURCE_TEXT, SLOT_TARGET_LANGUAGE, SLOT_SOURCE_LANGUAGE];
    for (i, (&n, slot)) in counts.iter().zip(names).enumerate() {
        if n == 0 && i < 2 {
            return Err(TemplateError::MissingSlot { which: which.into(), slot });
        }
        if n > 1 {
            return Err(TemplateError::RepeatedSlot { which: which.into(), slot });
        }
    }
    Ok(())
}

/// Single left-to-right pass, so slot-like text inside substituted values is
/// left alone.
fn substitute<'a>(template: &str, value: impl Fn(&str) -> Option<&'a str>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for (i, slot) in slots(template) {
        if let Some(v) = value(slot) {
            out.push_str(&template[last..i]);
            out.push_str(v);
            last = i + slot.len();
        }
    }
    out.push_str(&template[last..]);
    out
}
