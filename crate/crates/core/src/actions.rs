//! Mapping of imported API functions to malware actions.
//!
//! The map is keyed on lowercased function names, optionally qualified with
//! the lowercased DLL base name (`dllbase:function`). Lookup tries the
//! qualified key, then the bare name, then the name with a trailing `A`,
//! `W`, `ExA`, `ExW` or `Ex` removed, so ANSI/wide/extended API variants
//! collapse onto one entry. Imports without a mapping are deliberately
//! dropped (and counted): that is the dimensionality reduction, not a
//! failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::ingest::RawSample;
use crate::vocab::Vocabulary;

/// Suffixes collapsed during the third lookup step, tried in this order.
const STRIPPABLE_SUFFIXES: [&str; 5] = ["a", "w", "exa", "exw", "ex"];

/// The bundled seed mapping.
pub const BUILTIN_ACTION_MAP: &str = include_str!("../data/action_map.tsv");

#[derive(Debug, Clone)]
struct MapEntry {
    action_id: String,
    /// Whether suffix-stripped lookups may land on this entry.
    strippable: bool,
}

/// A validated API-to-action mapping table.
#[derive(Debug, Clone, Default)]
pub struct ApiActionMap {
    entries: BTreeMap<String, MapEntry>,
}

#[derive(Debug, Error)]
pub enum ActionMapError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed row (expected canonical_key<TAB>action_id)")]
    MalformedRow { line: usize },
    #[error("line {line}: key `{key}` is not lowercase")]
    KeyNotCanonical { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: unknown action id `{action_id}` for key `{key}`")]
    UnknownActionId {
        line: usize,
        key: String,
        action_id: String,
    },
}

/// Result of mapping one sample's import table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappedImports {
    /// Deduplicated action ids, each present in the vocabulary catalog.
    pub actions: BTreeSet<String>,
    /// Count of imported functions that had no mapping.
    pub unmapped: u64,
}

/// Lowercases a DLL name and strips one trailing `.dll`.
pub fn normalize_dll_name(dll: &str) -> String {
    let lower = dll.to_ascii_lowercase();
    lower
        .strip_suffix(".dll")
        .map(str::to_string)
        .unwrap_or(lower)
}

/// The canonical keys probed for one import, in lookup order:
/// dll-qualified exact, exact, then each strippable-suffix reduction.
pub fn candidate_keys(dll: &str, function: &str) -> Vec<String> {
    let function = function.to_ascii_lowercase();
    let dll = normalize_dll_name(dll);
    let mut keys = Vec::with_capacity(3);
    if !dll.is_empty() {
        keys.push(format!("{dll}:{function}"));
    }
    keys.push(function.clone());
    for suffix in STRIPPABLE_SUFFIXES {
        if let Some(stripped) = function.strip_suffix(suffix) {
            if !stripped.is_empty() {
                keys.push(stripped.to_string());
            }
        }
    }
    keys
}

impl ApiActionMap {
    /// Parses and validates a TSV mapping. Rows are
    /// `canonical_key<TAB>action_id` with an optional third column `exact`
    /// that opts the entry out of suffix collapsing; `#` starts a comment.
    pub fn parse(text: &str, vocab: &Vocabulary) -> Result<ApiActionMap, ActionMapError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let row = raw_line.trim();
            if row.is_empty() || row.starts_with('#') {
                continue;
            }
            let mut cols = row.split('\t');
            let key = cols
                .next()
                .filter(|k| !k.is_empty())
                .ok_or(ActionMapError::MalformedRow { line })?;
            let action_id = cols
                .next()
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .ok_or(ActionMapError::MalformedRow { line })?;
            let strippable = match cols.next().map(str::trim) {
                None | Some("") => true,
                Some("exact") => false,
                Some(_) => return Err(ActionMapError::MalformedRow { line }),
            };
            if key != key.to_ascii_lowercase() {
                return Err(ActionMapError::KeyNotCanonical {
                    line,
                    key: key.to_string(),
                });
            }
            if vocab.action(action_id).is_none() {
                return Err(ActionMapError::UnknownActionId {
                    line,
                    key: key.to_string(),
                    action_id: action_id.to_string(),
                });
            }
            if entries
                .insert(
                    key.to_string(),
                    MapEntry {
                        action_id: action_id.to_string(),
                        strippable,
                    },
                )
                .is_some()
            {
                return Err(ActionMapError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(ApiActionMap { entries })
    }

    /// Loads and validates a mapping file.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<ApiActionMap, ActionMapError> {
        let text = fs::read_to_string(path).map_err(|source| ActionMapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ApiActionMap::parse(&text, vocab)
    }

    /// The bundled seed mapping, validated against `vocab`.
    pub fn builtin(vocab: &Vocabulary) -> ApiActionMap {
        ApiActionMap::parse(BUILTIN_ACTION_MAP, vocab)
            .expect("bundled action map validates against bundled vocabulary")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolves one import to an action id using the candidate-key cascade.
    pub fn lookup(&self, dll: &str, function: &str) -> Option<&str> {
        let function = function.to_ascii_lowercase();
        let dll = normalize_dll_name(dll);
        if !dll.is_empty() {
            if let Some(entry) = self.entries.get(&format!("{dll}:{function}")) {
                return Some(&entry.action_id);
            }
        }
        if let Some(entry) = self.entries.get(&function) {
            return Some(&entry.action_id);
        }
        for suffix in STRIPPABLE_SUFFIXES {
            if let Some(stripped) = function.strip_suffix(suffix) {
                if stripped.is_empty() {
                    continue;
                }
                if let Some(entry) = self.entries.get(stripped) {
                    if entry.strippable {
                        return Some(&entry.action_id);
                    }
                }
            }
        }
        None
    }
}

/// Maps a sample's whole import table onto a deduplicated action set.
/// Multiple functions with a similar effect collapse onto one action;
/// unmapped functions are dropped and counted.
pub fn map_imports(
    imports: &BTreeMap<String, Vec<String>>,
    map: &ApiActionMap,
) -> MappedImports {
    let mut result = MappedImports::default();
    for (dll, functions) in imports {
        for function in functions {
            match map.lookup(dll, function) {
                Some(action) => {
                    result.actions.insert(action.to_string());
                }
                None => result.unmapped += 1,
            }
        }
    }
    result
}

/// Convenience wrapper over a [`RawSample`].
pub fn map_sample_imports(sample: &RawSample, map: &ApiActionMap) -> MappedImports {
    map_imports(&sample.imports, map)
}
