//! Sensitive-API vocabulary: loading, extension, and corpus restriction.
//!
//! Vocabulary files are UTF-8 text with one API identifier per line. A line
//! may carry a permission annotation after a tab, which is ignored, and `#`
//! starts a comment line. Identifiers are compared as exact strings; there is
//! no case folding or signature normalization.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::callgraph::listing::{CallKind, CallListing};
use crate::error::{Error, Result};
use crate::seeds::fnv1a64;

/// Where a vocabulary entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Present in the base mapping file only.
    Mapping,
    /// Added by the extension file only.
    Extension,
    /// Present in both files.
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub identifier: String,
    pub provenance: Provenance,
}

/// Ordered API vocabulary. Indices are stable: extending appends, and
/// restriction preserves relative order while recomputing indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiVocab {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
}

impl ApiVocab {
    fn from_entries(entries: Vec<VocabEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.identifier.clone(), i))
            .collect();
        Ok(ApiVocab { entries, index })
    }

    /// Build from identifier lines of a mapping file (already read).
    pub fn from_mapping_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut entries: Vec<VocabEntry> = Vec::new();
        let mut seen = HashMap::new();
        for id in parse_identifier_lines(lines) {
            if seen.insert(id.clone(), ()).is_none() {
                entries.push(VocabEntry { identifier: id, provenance: Provenance::Mapping });
            }
        }
        Self::from_entries(entries)
    }

    /// Union with an extension file: existing identifiers keep their index
    /// and are marked [`Provenance::Both`]; new ones append in file order.
    pub fn extend<'a>(mut self, lines: impl IntoIterator<Item = &'a str>) -> Self {
        for id in parse_identifier_lines(lines) {
            match self.index.get(&id) {
                Some(&i) => {
                    if self.entries[i].provenance == Provenance::Mapping {
                        self.entries[i].provenance = Provenance::Both;
                    }
                }
                None => {
                    self.index.insert(id.clone(), self.entries.len());
                    self.entries.push(VocabEntry { identifier: id, provenance: Provenance::Extension });
                }
            }
        }
        self
    }

    /// Keep only APIs that occur as an API call in at least one listing.
    /// Order and provenance are preserved; indices are recomputed.
    pub fn restrict(&self, corpus: &[CallListing]) -> Result<ApiVocab> {
        let mut used = vec![false; self.entries.len()];
        for listing in corpus {
            for method in &listing.methods {
                for call in &method.calls {
                    if call.kind == CallKind::Api {
                        if let Some(&i) = self.index.get(&call.target) {
                            used[i] = true;
                        }
                    }
                }
            }
        }
        let entries: Vec<VocabEntry> = self
            .entries
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(e, _)| e.clone())
            .collect();
        ApiVocab::from_entries(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, identifier: &str) -> bool {
        self.index.contains_key(identifier)
    }

    pub fn index_of(&self, identifier: &str) -> Option<usize> {
        self.index.get(identifier).copied()
    }

    pub fn identifier(&self, index: usize) -> &str {
        &self.entries[index].identifier
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Stable fingerprint over the ordered identifier list. Persisted models
    /// record it and refuse to load against a different vocabulary.
    pub fn hash(&self) -> String {
        let mut acc: u64 = 0xcbf2_9ce4_8422_2325;
        for e in &self.entries {
            acc = splitmix_combine(acc, fnv1a64(e.identifier.as_bytes()));
        }
        format!("{acc:016x}")
    }
}

fn splitmix_combine(acc: u64, h: u64) -> u64 {
    crate::seeds::splitmix64(acc ^ h.rotate_left(17))
}

/// Extract identifiers from vocabulary-file lines: strips comments, blank
/// lines, and tab-separated permission annotations.
fn parse_identifier_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    lines
        .into_iter()
        .map(|line| line.trim_end_matches('\r'))
        .filter(|line| !line.trim().is_empty() && !line.trim_start().starts_with('#'))
        .map(|line| line.split('\t').next().unwrap_or("").trim().to_string())
        .filter(|id| !id.is_empty())
        .collect()
}

/// Load the base mapping file.
pub fn load_api_mapping(path: &Path) -> Result<ApiVocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ApiVocab::from_mapping_lines(text.lines())
}

/// Load an extension file and fold it into an existing vocabulary.
pub fn extend_vocab(vocab: ApiVocab, path: &Path) -> Result<ApiVocab> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(vocab.extend(text.lines()))
}
