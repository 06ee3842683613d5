//! Flores-200 style language tags and the registry that maps codes to the
//! display names used inside prompts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_REGISTRY: &str = include_str!("../data/languages.tsv");

fn tag_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"^[a-z]{3}_[A-Za-z]{4}$").expect("static regex"))
}

/// A language code such as `xho_Latn` together with its human-readable name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LanguageTag {
    code: String,
    display_name: String,
}

impl LanguageTag {
    pub fn new(code: impl Into<String>, display_name: impl Into<String>) -> Result<Self> {
        let code = code.into();
        let display_name = display_name.into();
        if !tag_pattern().is_match(&code) {
            return Err(Error::MalformedTag(code));
        }
        if display_name.trim().is_empty() {
            return Err(Error::Registry(format!("empty display name for `{code}`")));
        }
        Ok(Self { code, display_name })
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn display_name(&self) -> &str {
        &self.display_name
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

/// Code → display name table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    names: BTreeMap<String, String>,
}

impl LanguageRegistry {
    /// The registry compiled into the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_REGISTRY).expect("bundled language registry is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `code<TAB>display_name` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (code, name) = line
                .split_once('\t')
                .ok_or_else(|| Error::Registry(format!("line {}: expected code<TAB>name", idx + 1)))?;
            let tag = LanguageTag::new(code.trim(), name.trim())
                .map_err(|e| Error::Registry(format!("line {}: {e}", idx + 1)))?;
            names.insert(tag.code, tag.display_name);
        }
        if names.is_empty() {
            return Err(Error::Registry("registry is empty".into()));
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.names.keys().map(String::as_str)
    }

    /// Resolves a raw code against the registry.
    pub fn parse_tag(&self, raw: &str) -> Result<LanguageTag> {
        parse_language_tag(raw, &self.names)
    }
}

impl Default for LanguageRegistry {
    fn default() -> Self {
        Self::bundled()
    }
}

pub fn parse_language_tag(raw: &str, registry: &BTreeMap<String, String>) -> Result<LanguageTag> {
    if registry.is_empty() {
        return Err(Error::Registry("registry is empty".into()));
    }
    let code = raw.trim();
    if !tag_pattern().is_match(code) {
        return Err(Error::MalformedTag(raw.to_string()));
    }
    let name = registry
        .get(code)
        .ok_or_else(|| Error::UnknownLanguage(code.to_string()))?;
    LanguageTag::new(code, name.clone())
}
