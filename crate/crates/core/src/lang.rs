use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Language tag carried by every document.
///
/// The four target languages get their own variants; everything else is
/// folded into [`Lang::Other`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Fr,
    De,
    Es,
    Other,
}

impl Lang {
    /// The four languages the toolkit builds corpora for, in report order.
    pub const TARGETS: [Lang; 4] = [Lang::En, Lang::Fr, Lang::De, Lang::Es];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Fr => "fr",
            Lang::De => "de",
            Lang::Es => "es",
            Lang::Other => "other",
        }
    }

    /// English name, as used in prompts and reports. `None` for `Other`.
    pub fn name(self) -> Option<&'static str> {
        match self {
            Lang::En => Some("English"),
            Lang::Fr => Some("French"),
            Lang::De => Some("German"),
            Lang::Es => Some("Spanish"),
            Lang::Other => None,
        }
    }

    pub fn is_target(self) -> bool {
        self != Lang::Other
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language tag `{0}` (expected en, fr, de, es or other)")]
pub struct UnknownLang(pub String);

impl FromStr for Lang {
    type Err = UnknownLang;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Lang::En),
            "fr" => Ok(Lang::Fr),
            "de" => Ok(Lang::De),
            "es" => Ok(Lang::Es),
            "other" => Ok(Lang::Other),
            _ => Err(UnknownLang(s.to_string())),
        }
    }
}
