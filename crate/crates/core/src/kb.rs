//! ABox assembly: PE file and section individuals built from parsed samples.
//!
//! Individuals carry their data-property values, derived features, flags and
//! mapped actions. Feature/flag/action links always point at the
//! vocabulary's prototypical instances. IRIs are `<base>#<sha256>` for files
//! and `<base>#<sha256>_section_<i>` for sections, which keeps them stable
//! and join-friendly with the examples sidecar files.

use std::collections::BTreeSet;

use crate::actions::{map_sample_imports, ApiActionMap};
use crate::features::{
    classify_file, classify_section, derive_file_features, derive_section_features,
    derive_section_flags, entry_point_unresolved, DerivationConfig, FileClass, FileFeature,
    SectionClass, SectionFeature, SectionFlag,
};
use crate::ingest::{Label, RawSample};
use crate::rdf::term::Namespaces;

/// The seven integer data properties of a PE file individual, in property
/// name order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FileDataValues {
    pub exports_count: u64,
    pub imports_count: u64,
    pub mz_count: u64,
    pub path_strings_count: u64,
    pub registry_strings_count: u64,
    pub symbols_count: u64,
    pub url_strings_count: u64,
}

impl FileDataValues {
    pub fn from_sample(sample: &RawSample) -> Self {
        FileDataValues {
            exports_count: sample.general.exports,
            imports_count: sample.general.imports,
            mz_count: sample.strings.mz,
            path_strings_count: sample.strings.paths,
            registry_strings_count: sample.strings.registry,
            symbols_count: sample.general.symbols,
            url_strings_count: sample.strings.urls,
        }
    }

    pub fn entries(&self) -> [(&'static str, u64); 7] {
        [
            ("exports_count", self.exports_count),
            ("imports_count", self.imports_count),
            ("mz_count", self.mz_count),
            ("path_strings_count", self.path_strings_count),
            ("registry_strings_count", self.registry_strings_count),
            ("symbols_count", self.symbols_count),
            ("url_strings_count", self.url_strings_count),
        ]
    }

    pub fn get(&self, property: &str) -> Option<u64> {
        self.entries()
            .into_iter()
            .find(|(name, _)| *name == property)
            .map(|(_, v)| v)
    }

    pub fn set(&mut self, property: &str, value: u64) -> bool {
        match property {
            "exports_count" => self.exports_count = value,
            "imports_count" => self.imports_count = value,
            "mz_count" => self.mz_count = value,
            "path_strings_count" => self.path_strings_count = value,
            "registry_strings_count" => self.registry_strings_count = value,
            "symbols_count" => self.symbols_count = value,
            "url_strings_count" => self.url_strings_count = value,
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionIndividual {
    /// Zero-based position within the owning file's section table.
    pub index: usize,
    pub section_class: SectionClass,
    pub section_name: String,
    pub section_entropy: f64,
    pub flags: BTreeSet<SectionFlag>,
    pub features: BTreeSet<SectionFeature>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PEFileIndividual {
    pub sha256: String,
    pub file_class: FileClass,
    pub data: FileDataValues,
    pub features: BTreeSet<FileFeature>,
    /// Mapped action ids, all present in the vocabulary catalog.
    pub actions: BTreeSet<String>,
    pub sections: Vec<SectionIndividual>,
    pub label: Label,
    pub avclass: Option<String>,
}

impl PEFileIndividual {
    pub fn local_name(&self) -> &str {
        &self.sha256
    }

    pub fn iri(&self, ns: &Namespaces) -> String {
        format!("{}{}", ns.peo, self.sha256)
    }

    pub fn section_local_name(&self, index: usize) -> String {
        format!("{}_section_{}", self.sha256, index)
    }

    pub fn section_iri(&self, ns: &Namespaces, index: usize) -> String {
        format!("{}{}", ns.peo, self.section_local_name(index))
    }
}

/// Per-sample observations surfaced into the run report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleNotes {
    pub unmapped_imports: u64,
    pub entry_point_unresolved: bool,
}

/// Aggregated counters from a whole build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub duplicates: u64,
    pub unmapped_imports: u64,
    pub entry_point_unresolved: u64,
}

/// The assembled ABox: one individual per unique sha256, sorted by sha256.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub files: Vec<PEFileIndividual>,
}

impl KnowledgeBase {
    pub fn file(&self, sha256: &str) -> Option<&PEFileIndividual> {
        self.files
            .binary_search_by(|f| f.sha256.as_str().cmp(sha256))
            .ok()
            .map(|i| &self.files[i])
    }

    pub fn section_count(&self) -> usize {
        self.files.iter().map(|f| f.sections.len()).sum()
    }

    /// Files restricted to the given sha256 set, preserving sorted order.
    pub fn subset(&self, sha256s: &BTreeSet<String>) -> KnowledgeBase {
        KnowledgeBase {
            files: self
                .files
                .iter()
                .filter(|f| sha256s.contains(&f.sha256))
                .cloned()
                .collect(),
        }
    }
}

/// Builds one file individual by composing classification, feature
/// derivation and import mapping. Pure; duplicate handling lives in
/// [`build_kb`].
pub fn build_individual(
    sample: &RawSample,
    cfg: &DerivationConfig,
    map: &ApiActionMap,
) -> (PEFileIndividual, SampleNotes) {
    let mapped = map_sample_imports(sample, map);
    let sections = sample
        .section
        .sections
        .iter()
        .enumerate()
        .map(|(index, entry)| {
            let flags = derive_section_flags(entry);
            let features = derive_section_features(entry, &flags, cfg);
            SectionIndividual {
                index,
                section_class: classify_section(entry),
                section_name: entry.name.clone(),
                section_entropy: entry.entropy,
                flags,
                features,
            }
        })
        .collect();
    let notes = SampleNotes {
        unmapped_imports: mapped.unmapped,
        entry_point_unresolved: entry_point_unresolved(sample),
    };
    let individual = PEFileIndividual {
        sha256: sample.sha256.clone(),
        file_class: classify_file(sample),
        data: FileDataValues::from_sample(sample),
        features: derive_file_features(sample, cfg),
        actions: mapped.actions,
        sections,
        label: sample.label,
        avclass: sample.avclass.clone(),
    };
    (individual, notes)
}

/// Deduplicates built individuals (first occurrence of a sha256 wins),
/// aggregates their notes, and sorts the result by sha256. Individuals must
/// be supplied in input order for the duplicate rule to be meaningful.
pub fn assemble_kb(
    individuals: Vec<(PEFileIndividual, SampleNotes)>,
) -> (KnowledgeBase, BuildReport) {
    let mut report = BuildReport::default();
    let mut seen = BTreeSet::new();
    let mut files = Vec::with_capacity(individuals.len());
    for (individual, notes) in individuals {
        if !seen.insert(individual.sha256.clone()) {
            report.duplicates += 1;
            continue;
        }
        report.unmapped_imports += notes.unmapped_imports;
        if notes.entry_point_unresolved {
            report.entry_point_unresolved += 1;
        }
        files.push(individual);
    }
    files.sort_by(|a, b| a.sha256.cmp(&b.sha256));
    (KnowledgeBase { files }, report)
}

/// Assembles a knowledge base from samples in input order. The first
/// occurrence of a sha256 wins; later ones are counted as duplicates.
/// Output order is sorted by sha256 regardless of input order.
pub fn build_kb<'a, I>(
    samples: I,
    cfg: &DerivationConfig,
    map: &ApiActionMap,
) -> (KnowledgeBase, BuildReport)
where
    I: IntoIterator<Item = &'a RawSample>,
{
    let individuals = samples
        .into_iter()
        .map(|sample| build_individual(sample, cfg, map))
        .collect();
    assemble_kb(individuals)
}
