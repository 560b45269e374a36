//! Pass vocabulary and baseline sequences.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("duplicate pass `{name}` at line {line}")]
    DuplicatePass { name: String, line: usize },
    #[error("catalog contains no passes")]
    EmptyCatalog,
    #[error("line {line}: expected exactly one pass token")]
    MalformedLine { line: usize },
    #[error("unknown pass `{name}` at line {line}")]
    UnknownPass { name: String, line: usize },
    #[error("invalid pass name {0:?}")]
    InvalidName(String),
}

/// A single optimization pass token, passed verbatim to the optimizer.
///
/// Non-empty, no whitespace or control characters. Comparison is exact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct PassName(String);

impl PassName {
    pub fn new(name: impl Into<String>) -> Result<Self, CatalogError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(CatalogError::InvalidName(name));
        }
        Ok(PassName(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for PassName {
    type Error = CatalogError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        PassName::new(value)
    }
}

impl From<PassName> for String {
    fn from(value: PassName) -> Self {
        value.0
    }
}

impl fmt::Display for PassName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The set of passes a search may draw from, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassCatalog {
    passes: Vec<PassName>,
    index: BTreeSet<PassName>,
    pub source_label: String,
}

impl PassCatalog {
    pub fn new(passes: Vec<PassName>, source_label: impl Into<String>) -> Result<Self, CatalogError> {
        if passes.is_empty() {
            return Err(CatalogError::EmptyCatalog);
        }
        let mut index = BTreeSet::new();
        for (i, p) in passes.iter().enumerate() {
            if !index.insert(p.clone()) {
                return Err(CatalogError::DuplicatePass { name: p.0.clone(), line: i + 1 });
            }
        }
        Ok(PassCatalog { passes, index, source_label: source_label.into() })
    }

    pub fn passes(&self) -> &[PassName] {
        &self.passes
    }

    pub fn len(&self) -> usize {
        self.passes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passes.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        // BTreeSet<PassName> can't be probed with &str directly
        self.index.contains(&PassName(name.to_owned()))
    }

    pub fn get(&self, name: &str) -> Option<&PassName> {
        self.passes.iter().find(|p| p.as_str() == name)
    }

    /// Renders the catalog in the line format accepted by [`load_catalog`].
    pub fn to_text(&self) -> String {
        lines_to_text(&self.passes)
    }
}

/// An ordered pass pipeline. Duplicates are allowed and it may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PassSequence {
    pub passes: Vec<PassName>,
    pub label: String,
}

impl PassSequence {
    pub fn new(passes: Vec<PassName>, label: impl Into<String>) -> Self {
        PassSequence { passes, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.passes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PassName> {
        self.passes.iter()
    }

    pub fn to_text(&self) -> String {
        lines_to_text(&self.passes)
    }
}

fn lines_to_text(passes: &[PassName]) -> String {
    let mut out = String::new();
    for p in passes {
        out.push_str(p.as_str());
        out.push('\n');
    }
    out
}

/// Yields `(line_number, token)` for every non-blank, non-comment line.
fn tokens(text: &str) -> impl Iterator<Item = Result<(usize, &str), CatalogError>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        let mut parts = trimmed.split_whitespace();
        let tok = parts.next()?;
        if parts.next().is_some() {
            return Some(Err(CatalogError::MalformedLine { line }));
        }
        Some(Ok((line, tok)))
    })
}

/// Parses a catalog file. The caller sets `source_label` afterwards if the
/// default (empty) is not wanted.
pub fn load_catalog(text: &str) -> Result<PassCatalog, CatalogError> {
    let mut passes = Vec::new();
    let mut seen = BTreeSet::new();
    for item in tokens(text) {
        let (line, tok) = item?;
        let name = PassName::new(tok).map_err(|_| CatalogError::MalformedLine { line })?;
        if !seen.insert(name.clone()) {
            return Err(CatalogError::DuplicatePass { name: name.0, line });
        }
        passes.push(name);
    }
    if passes.is_empty() {
        return Err(CatalogError::EmptyCatalog);
    }
    Ok(PassCatalog { passes, index: seen, source_label: String::new() })
}

/// Parses a sequence file, checking every token against `catalog`.
pub fn load_sequence(text: &str, catalog: &PassCatalog) -> Result<PassSequence, CatalogError> {
    let mut passes = Vec::new();
    for item in tokens(text) {
        let (line, tok) = item?;
        match catalog.get(tok) {
            Some(p) => passes.push(p.clone()),
            None => return Err(CatalogError::UnknownPass { name: tok.to_owned(), line }),
        }
    }
    Ok(PassSequence { passes, label: String::new() })
}

/// log10 of the number of sequences of `sequence_length` drawn from
/// `catalog_size` passes.
pub fn search_space_order(catalog_size: u64, sequence_length: u64) -> f64 {
    debug_assert!(catalog_size >= 1);
    sequence_length as f64 * libm::log10(catalog_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(c: &PassCatalog) -> Vec<&str> {
        c.passes().iter().map(|p| p.as_str()).collect()
    }

    #[test]
    fn catalog_parses_in_order() {
        let c = load_catalog("a\nb\nc\n").unwrap();
        assert_eq!(names(&c), vec!["a", "b", "c"]);
    }

    #[test]
    fn catalog_skips_comments_and_blanks() {
        let c = load_catalog("a\n# comment\n\nb\n").unwrap();
        assert_eq!(names(&c), vec!["a", "b"]);
    }

    #[test]
    fn catalog_duplicate() {
        assert_eq!(
            load_catalog("a\nb\na\n"),
            Err(CatalogError::DuplicatePass { name: "a".into(), line: 3 })
        );
    }

    #[test]
    fn catalog_empty_and_malformed() {
        assert_eq!(load_catalog("# nothing\n\n"), Err(CatalogError::EmptyCatalog));
        assert_eq!(load_catalog("a\nb c\n"), Err(CatalogError::MalformedLine { line: 2 }));
    }

    #[test]
    fn catalog_is_case_sensitive() {
        let c = load_catalog("gvn\nGVN\n").unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.contains("gvn"));
        assert!(!c.contains("Gvn"));
    }

    #[test]
    fn sequence_allows_duplicates() {
        let c = load_catalog("a\nb\nc\n").unwrap();
        let s = load_sequence("a\nb\nb\n", &c).unwrap();
        let got: Vec<_> = s.iter().map(|p| p.as_str()).collect();
        assert_eq!(got, vec!["a", "b", "b"]);
    }

    #[test]
    fn sequence_empty() {
        let c = load_catalog("a\nb\nc\n").unwrap();
        assert!(load_sequence("", &c).unwrap().is_empty());
    }

    #[test]
    fn sequence_unknown_pass() {
        let c = load_catalog("a\nb\nc\n").unwrap();
        assert_eq!(
            load_sequence("z\n", &c),
            Err(CatalogError::UnknownPass { name: "z".into(), line: 1 })
        );
    }

    #[test]
    fn search_space_examples() {
        assert!((search_space_order(10, 3) - 3.0).abs() < 1e-12);
        assert_eq!(search_space_order(1, 80), 0.0);
        // 80 * log10(120) = 166.33449968... (mpmath, 40 digits)
        assert!((search_space_order(120, 80) - 166.334_499_683_81).abs() < 1e-9);
    }

    #[test]
    fn pass_name_rejects_whitespace() {
        assert!(PassName::new("").is_err());
        assert!(PassName::new("a b").is_err());
        assert!(PassName::new("a\tb").is_err());
        assert!(PassName::new("-loop-unroll").is_ok());
    }
}
