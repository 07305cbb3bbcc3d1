//! Hierarchical clinical codes (Read codes) and the code → description
//! dictionary.
//!
//! A code token such as `N245.16` splits into a five-character *stem*
//! (`N245.`) and an optional *term suffix* (`16`). Within the stem, dots are
//! padding: the code's *level* is the number of characters before the first
//! dot, so `N24..00` sits at level 3 and `N245.16` at level 4. Coarser
//! analyses aggregate codes by a level-k prefix key; the finest analysis
//! keys on the full raw token.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use thiserror::Error;

use crate::tabio;

/// Description returned for codes absent from the dictionary.
pub const UNKNOWN_DESCRIPTION: &str = "(unknown)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReadCodeError {
    #[error("empty code token")]
    EmptyToken,
    #[error("code token `{0}` contains whitespace")]
    TokenContainsWhitespace(String),
    #[error("code token `{0}` starts with a padding dot")]
    LeadingDot(String),
}

/// A parsed clinical code. The raw token is preserved byte-for-byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReadCode {
    raw: String,
    /// Byte offset where the stem ends (at most the 5th character boundary).
    stem_end: usize,
    level: u8,
}

impl ReadCode {
    /// The full code token as ingested.
    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// First five characters of the token (fewer if the token is shorter).
    pub fn stem(&self) -> &str {
        &self.raw[..self.stem_end]
    }

    /// Characters beyond the stem; empty for five-character codes.
    pub fn term_suffix(&self) -> &str {
        &self.raw[self.stem_end..]
    }

    /// Hierarchy depth: count of stem characters before the first dot,
    /// always in `1..=5`.
    pub fn level(&self) -> u8 {
        self.level
    }

    /// Aggregation key at level `k` (`1..=5`): the first `k` stem characters
    /// when the code is at least that deep, otherwise the full raw token;
    /// a code never aggregates below its own depth.
    pub fn key_at_level(&self, k: u8) -> &str {
        assert!((1..=5).contains(&k), "aggregation level must be in 1..=5");
        if self.level >= k {
            let end = self
                .stem()
                .char_indices()
                .nth(k as usize)
                .map(|(i, _)| i)
                .unwrap_or(self.stem_end);
            &self.raw[..end]
        } else {
            &self.raw
        }
    }
}

impl fmt::Display for ReadCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

/// Parse a code token. The stem is the first five characters (all of them
/// for shorter tokens, which are treated as dot-padded); anything beyond is
/// the term suffix.
pub fn parse_code(token: &str) -> Result<ReadCode, ReadCodeError> {
    if token.is_empty() {
        return Err(ReadCodeError::EmptyToken);
    }
    if token.chars().any(char::is_whitespace) {
        return Err(ReadCodeError::TokenContainsWhitespace(token.to_string()));
    }
    let stem_end = token
        .char_indices()
        .nth(5)
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let level = token[..stem_end].chars().take_while(|&c| c != '.').count() as u8;
    if level == 0 {
        return Err(ReadCodeError::LeadingDot(token.to_string()));
    }
    Ok(ReadCode {
        raw: token.to_string(),
        stem_end,
        level,
    })
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("dictionary is missing required column `{0}` in its header")]
    MissingHeader(&'static str),
    #[error("dictionary line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("failed to read dictionary: {0}")]
    Io(#[from] std::io::Error),
}

/// Lookup table from raw code text to a human-readable description.
#[derive(Debug, Default)]
pub struct CodeDictionary {
    entries: HashMap<String, String>,
    duplicates: usize,
}

impl CodeDictionary {
    /// An empty dictionary; every lookup reports [`UNKNOWN_DESCRIPTION`].
    pub fn empty() -> Self {
        Self::default()
    }

    /// Load a `code,description` table (comma- or tab-separated, detected
    /// from the header line). Duplicate codes keep the first description and
    /// are counted as warnings rather than errors.
    pub fn load<R: Read + Send + 'static>(input: R) -> Result<Self, DictionaryError> {
        let mut reader = tabio::delimited_reader(input)?;
        let headers = reader
            .headers()
            .map_err(|e| DictionaryError::MalformedRow {
                line: 1,
                reason: e.to_string(),
            })?
            .clone();
        let code_col = tabio::column_index(&headers, "code")
            .ok_or(DictionaryError::MissingHeader("code"))?;
        let desc_col = tabio::column_index(&headers, "description")
            .ok_or(DictionaryError::MissingHeader("description"))?;

        let mut entries = HashMap::new();
        let mut duplicates = 0usize;
        for record in reader.records() {
            let record = record.map_err(|e| DictionaryError::MalformedRow {
                line: e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(0),
                reason: e.to_string(),
            })?;
            let line = tabio::record_line(&record);
            let code = record.get(code_col).unwrap_or("");
            let description = record.get(desc_col).ok_or(DictionaryError::MalformedRow {
                line,
                reason: "missing description field".into(),
            })?;
            if code.is_empty() {
                return Err(DictionaryError::MalformedRow {
                    line,
                    reason: "empty code".into(),
                });
            }
            if entries.contains_key(code) {
                duplicates += 1;
            } else {
                entries.insert(code.to_string(), description.to_string());
            }
        }
        Ok(CodeDictionary {
            entries,
            duplicates,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count of duplicate-code rows skipped during load.
    pub fn duplicate_count(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, code: &str) -> Option<&str> {
        self.entries.get(code).map(String::as_str)
    }

    /// Description for an exact code, or the explicit unknown marker.
    pub fn describe(&self, code: &str) -> &str {
        self.get(code).unwrap_or(UNKNOWN_DESCRIPTION)
    }

    /// Description for an aggregation key. Level-truncated keys such as
    /// `N24` usually appear in the dictionary in their dot-padded spelling
    /// (`N24..` or `N24..00`), so those spellings are tried before giving
    /// up.
    pub fn describe_key(&self, key: &str) -> &str {
        if let Some(d) = self.get(key) {
            return d;
        }
        if key.chars().count() < 5 {
            let padded: String = key
                .chars()
                .chain(std::iter::repeat('.'))
                .take(5)
                .collect();
            if let Some(d) = self.get(&padded) {
                return d;
            }
            if let Some(d) = self.get(&format!("{padded}00")) {
                return d;
            }
        } else if let Some(d) = self.get(&format!("{key}00")) {
            return d;
        }
        UNKNOWN_DESCRIPTION
    }
}
