//! File classification, section classification, section flags and
//! file/section feature derivation.
//!
//! Three kinds of file features are assigned: direct 0/1 properties from the
//! `general` block, pre-processed checks against fields that are not
//! represented in the ontology (CLR data directory, entry-point section),
//! and derived features re-expressible over the represented data properties.
//! Derived features are the ones that can be suppressed at emission time.

use std::collections::BTreeSet;

use crate::ingest::{RawSample, SectionEntry};

/// Thresholds and name lists controlling feature derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivationConfig {
    /// A sample importing fewer functions than this has LowImportsCount.
    pub imports_threshold: u64,
    /// A section with entropy strictly above this has HighEntropy.
    pub entropy_threshold: f64,
    /// Section names regarded as compiler/linker-standard; exact,
    /// case-sensitive comparison (PE section names are byte strings).
    pub standard_section_names: Vec<String>,
    /// Data-directory name whose non-empty presence marks a .NET binary.
    pub clr_directory_name: String,
}

/// Names commonly produced by compilers and linkers.
pub const DEFAULT_STANDARD_SECTION_NAMES: &[&str] = &[
    ".text", ".data", ".rdata", ".rsrc", ".reloc", ".idata", ".edata", ".pdata", ".bss", ".tls",
    ".debug", ".xdata", ".didat", "CODE", "DATA", "BSS", ".itext", ".CRT",
];

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            imports_threshold: 10,
            entropy_threshold: 7.0,
            standard_section_names: DEFAULT_STANDARD_SECTION_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            clr_directory_name: "CLR_RUNTIME_HEADER".to_string(),
        }
    }
}

/// Top-level classification of a PE file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FileClass {
    ExecutableFile,
    DynamicLinkLibrary,
}

impl FileClass {
    pub fn class_name(self) -> &'static str {
        match self {
            FileClass::ExecutableFile => "ExecutableFile",
            FileClass::DynamicLinkLibrary => "DynamicLinkLibrary",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        match name {
            "ExecutableFile" => Some(FileClass::ExecutableFile),
            "DynamicLinkLibrary" => Some(FileClass::DynamicLinkLibrary),
            _ => None,
        }
    }
}

/// The fifteen file feature classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FileFeature {
    Debug,
    Relocations,
    Resources,
    Signature,
    Tls,
    Clr,
    NonexecutableEntryPoint,
    Exports,
    MultipleExecutableSections,
    LowImportsCount,
    NonstandardMz,
    PathStrings,
    RegistryStrings,
    UrlStrings,
    Symbols,
}

impl FileFeature {
    pub const ALL: [FileFeature; 15] = [
        FileFeature::Debug,
        FileFeature::Relocations,
        FileFeature::Resources,
        FileFeature::Signature,
        FileFeature::Tls,
        FileFeature::Clr,
        FileFeature::NonexecutableEntryPoint,
        FileFeature::Exports,
        FileFeature::MultipleExecutableSections,
        FileFeature::LowImportsCount,
        FileFeature::NonstandardMz,
        FileFeature::PathStrings,
        FileFeature::RegistryStrings,
        FileFeature::UrlStrings,
        FileFeature::Symbols,
    ];

    pub fn class_name(self) -> &'static str {
        match self {
            FileFeature::Debug => "Debug",
            FileFeature::Relocations => "Relocations",
            FileFeature::Resources => "Resources",
            FileFeature::Signature => "Signature",
            FileFeature::Tls => "TLS",
            FileFeature::Clr => "CLR",
            FileFeature::NonexecutableEntryPoint => "NonexecutableEntryPoint",
            FileFeature::Exports => "Exports",
            FileFeature::MultipleExecutableSections => "MultipleExecutableSections",
            FileFeature::LowImportsCount => "LowImportsCount",
            FileFeature::NonstandardMz => "NonstandardMZ",
            FileFeature::PathStrings => "PathStrings",
            FileFeature::RegistryStrings => "RegistryStrings",
            FileFeature::UrlStrings => "URLStrings",
            FileFeature::Symbols => "Symbols",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        FileFeature::ALL.into_iter().find(|f| f.class_name() == name)
    }

    /// Derived features combine data properties that are themselves
    /// represented in the ontology; they can be suppressed on emission.
    pub fn is_derived(self) -> bool {
        matches!(
            self,
            FileFeature::Exports
                | FileFeature::MultipleExecutableSections
                | FileFeature::LowImportsCount
                | FileFeature::NonstandardMz
                | FileFeature::PathStrings
                | FileFeature::RegistryStrings
                | FileFeature::UrlStrings
                | FileFeature::Symbols
        )
    }
}

/// Memory-access flags of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionFlag {
    Executable,
    Readable,
    Writable,
    Shareable,
}

impl SectionFlag {
    pub const ALL: [SectionFlag; 4] = [
        SectionFlag::Executable,
        SectionFlag::Readable,
        SectionFlag::Writable,
        SectionFlag::Shareable,
    ];

    pub fn class_name(self) -> &'static str {
        match self {
            SectionFlag::Executable => "Executable",
            SectionFlag::Readable => "Readable",
            SectionFlag::Writable => "Writable",
            SectionFlag::Shareable => "Shareable",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        SectionFlag::ALL.into_iter().find(|f| f.class_name() == name)
    }
}

/// The three section feature classes; all of them are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionFeature {
    HighEntropy,
    NonstandardSectionName,
    WriteExecuteSection,
}

impl SectionFeature {
    pub const ALL: [SectionFeature; 3] = [
        SectionFeature::HighEntropy,
        SectionFeature::NonstandardSectionName,
        SectionFeature::WriteExecuteSection,
    ];

    pub fn class_name(self) -> &'static str {
        match self {
            SectionFeature::HighEntropy => "HighEntropy",
            SectionFeature::NonstandardSectionName => "NonstandardSectionName",
            SectionFeature::WriteExecuteSection => "WriteExecuteSection",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        SectionFeature::ALL.into_iter().find(|f| f.class_name() == name)
    }
}

/// Content-based classification of a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionClass {
    Code,
    InitializedData,
    UninitializedData,
    Plain,
}

impl SectionClass {
    pub fn class_name(self) -> &'static str {
        match self {
            SectionClass::Code => "CodeSection",
            SectionClass::InitializedData => "InitializedDataSection",
            SectionClass::UninitializedData => "UninitializedDataSection",
            SectionClass::Plain => "Section",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        match name {
            "CodeSection" => Some(SectionClass::Code),
            "InitializedDataSection" => Some(SectionClass::InitializedData),
            "UninitializedDataSection" => Some(SectionClass::UninitializedData),
            "Section" => Some(SectionClass::Plain),
            _ => None,
        }
    }
}

/// DLL iff the COFF characteristics contain the `DLL` token; executable
/// otherwise (including when the header is absent).
pub fn classify_file(sample: &RawSample) -> FileClass {
    if sample
        .header
        .coff_characteristics
        .iter()
        .any(|c| c == "DLL")
    {
        FileClass::DynamicLinkLibrary
    } else {
        FileClass::ExecutableFile
    }
}

/// Maps the MEM_* props onto flags; other props are ignored here.
pub fn derive_section_flags(entry: &SectionEntry) -> BTreeSet<SectionFlag> {
    let mut flags = BTreeSet::new();
    for prop in &entry.props {
        match prop.as_str() {
            "MEM_EXECUTE" => {
                flags.insert(SectionFlag::Executable);
            }
            "MEM_READ" => {
                flags.insert(SectionFlag::Readable);
            }
            "MEM_WRITE" => {
                flags.insert(SectionFlag::Writable);
            }
            "MEM_SHARED" => {
                flags.insert(SectionFlag::Shareable);
            }
            _ => {}
        }
    }
    flags
}

/// Classifies a section by content type. Precedence: code, then
/// uninitialized data, then initialized data; a section never lands in two
/// subclasses.
pub fn classify_section(entry: &SectionEntry) -> SectionClass {
    let has = |p: &str| entry.props.iter().any(|x| x == p);
    if has("CNT_CODE") {
        SectionClass::Code
    } else if has("CNT_UNINITIALIZED_DATA") {
        SectionClass::UninitializedData
    } else if has("CNT_INITIALIZED_DATA") {
        SectionClass::InitializedData
    } else {
        SectionClass::Plain
    }
}

/// Section features: entropy strictly above the threshold, a name outside
/// the standard list, or writable+executable permissions.
pub fn derive_section_features(
    entry: &SectionEntry,
    flags: &BTreeSet<SectionFlag>,
    cfg: &DerivationConfig,
) -> BTreeSet<SectionFeature> {
    let mut features = BTreeSet::new();
    if entry.entropy > cfg.entropy_threshold {
        features.insert(SectionFeature::HighEntropy);
    }
    if !cfg
        .standard_section_names
        .iter()
        .any(|name| name == &entry.name)
    {
        features.insert(SectionFeature::NonstandardSectionName);
    }
    if flags.contains(&SectionFlag::Writable) && flags.contains(&SectionFlag::Executable) {
        features.insert(SectionFeature::WriteExecuteSection);
    }
    features
}

/// True when the entry-point section cannot be identified: the `entry` name
/// is empty or names no section in the table. Such samples never get
/// NonexecutableEntryPoint and are tallied in the run report.
pub fn entry_point_unresolved(sample: &RawSample) -> bool {
    sample.section.entry.is_empty()
        || !sample
            .section
            .sections
            .iter()
            .any(|s| s.name == sample.section.entry)
}

/// Derives the full file feature set for one sample.
pub fn derive_file_features(sample: &RawSample, cfg: &DerivationConfig) -> BTreeSet<FileFeature> {
    let mut features = BTreeSet::new();
    let general = &sample.general;
    let strings = &sample.strings;

    // Direct 0/1 properties.
    if general.has_debug == 1 {
        features.insert(FileFeature::Debug);
    }
    if general.has_relocations == 1 {
        features.insert(FileFeature::Relocations);
    }
    if general.has_resources == 1 {
        features.insert(FileFeature::Resources);
    }
    if general.has_signature == 1 {
        features.insert(FileFeature::Signature);
    }
    if general.has_tls == 1 {
        features.insert(FileFeature::Tls);
    }

    // Pre-processed checks over fields outside the data properties.
    if sample
        .datadirectories
        .iter()
        .any(|d| d.name == cfg.clr_directory_name && d.virtual_address > 0)
    {
        features.insert(FileFeature::Clr);
    }
    if !entry_point_unresolved(sample) {
        let entry_executable = sample
            .section
            .sections
            .iter()
            .find(|s| s.name == sample.section.entry)
            .is_some_and(|s| s.props.iter().any(|p| p == "MEM_EXECUTE"));
        if !entry_executable {
            features.insert(FileFeature::NonexecutableEntryPoint);
        }
    }

    // Derived features over represented data properties.
    if general.exports > 0 {
        features.insert(FileFeature::Exports);
    }
    if general.imports < cfg.imports_threshold {
        features.insert(FileFeature::LowImportsCount);
    }
    let executable_sections = sample
        .section
        .sections
        .iter()
        .filter(|s| s.props.iter().any(|p| p == "MEM_EXECUTE"))
        .count();
    if executable_sections >= 2 {
        features.insert(FileFeature::MultipleExecutableSections);
    }
    if strings.mz != 1 {
        features.insert(FileFeature::NonstandardMz);
    }
    if strings.paths > 0 {
        features.insert(FileFeature::PathStrings);
    }
    if strings.registry > 0 {
        features.insert(FileFeature::RegistryStrings);
    }
    if strings.urls > 0 {
        features.insert(FileFeature::UrlStrings);
    }
    if general.symbols > 0 {
        features.insert(FileFeature::Symbols);
    }

    features
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_sample;

    const LISTING_LINE: &str = include_str!("../tests/data/listing1.json");

    fn section(name: &str, entropy: f64, props: &[&str]) -> SectionEntry {
        SectionEntry {
            name: name.to_string(),
            size: 0,
            vsize: 0,
            entropy,
            props: props.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn listing_sample_is_executable() {
        let sample = parse_sample(LISTING_LINE).unwrap();
        assert_eq!(classify_file(&sample), FileClass::ExecutableFile);
    }

    #[test]
    fn dll_flag_wins() {
        let mut sample = parse_sample(LISTING_LINE).unwrap();
        sample.header.coff_characteristics = vec!["EXECUTABLE_IMAGE".into(), "DLL".into()];
        assert_eq!(classify_file(&sample), FileClass::DynamicLinkLibrary);
        sample.header.coff_characteristics.clear();
        assert_eq!(classify_file(&sample), FileClass::ExecutableFile);
    }

    #[test]
    fn flags_map_mem_props_only() {
        let s = section("CODE", 6.5, &["CNT_CODE", "MEM_EXECUTE", "MEM_READ"]);
        let flags = derive_section_flags(&s);
        assert_eq!(
            flags.into_iter().collect::<Vec<_>>(),
            [SectionFlag::Executable, SectionFlag::Readable]
        );
        assert!(derive_section_flags(&section("x", 0.0, &[])).is_empty());
        let wx = derive_section_flags(&section("x", 0.0, &["MEM_WRITE", "MEM_EXECUTE"]));
        assert!(wx.contains(&SectionFlag::Writable) && wx.contains(&SectionFlag::Executable));
    }

    #[test]
    fn section_classification_precedence() {
        assert_eq!(
            classify_section(&section("c", 0.0, &["CNT_CODE", "MEM_EXECUTE", "MEM_READ"])),
            SectionClass::Code
        );
        assert_eq!(
            classify_section(&section("d", 0.0, &["CNT_INITIALIZED_DATA"])),
            SectionClass::InitializedData
        );
        assert_eq!(
            classify_section(&section("b", 0.0, &["CNT_UNINITIALIZED_DATA"])),
            SectionClass::UninitializedData
        );
        assert_eq!(
            classify_section(&section("m", 0.0, &["CNT_CODE", "CNT_INITIALIZED_DATA"])),
            SectionClass::Code
        );
        assert_eq!(classify_section(&section("p", 0.0, &[])), SectionClass::Plain);
    }

    #[test]
    fn section_features_thresholds_are_strict() {
        let cfg = DerivationConfig::default();
        let code = section("CODE", 6.532932639432919, &["CNT_CODE", "MEM_EXECUTE", "MEM_READ"]);
        let flags = derive_section_flags(&code);
        assert!(derive_section_features(&code, &flags, &cfg).is_empty());

        let boundary = section(".text", 7.0, &[]);
        assert!(!derive_section_features(&boundary, &BTreeSet::new(), &cfg)
            .contains(&SectionFeature::HighEntropy));

        let evil = section(".evil", 7.5, &["MEM_WRITE", "MEM_EXECUTE"]);
        let flags = derive_section_flags(&evil);
        assert_eq!(
            derive_section_features(&evil, &flags, &cfg).len(),
            SectionFeature::ALL.len()
        );
    }

    #[test]
    fn section_name_match_is_case_sensitive() {
        let cfg = DerivationConfig::default();
        let lower = section("code", 1.0, &[]);
        assert!(derive_section_features(&lower, &BTreeSet::new(), &cfg)
            .contains(&SectionFeature::NonstandardSectionName));
        let upper = section("CODE", 1.0, &[]);
        assert!(!derive_section_features(&upper, &BTreeSet::new(), &cfg)
            .contains(&SectionFeature::NonstandardSectionName));
    }

    #[test]
    fn listing_file_features() {
        let sample = parse_sample(LISTING_LINE).unwrap();
        let features = derive_file_features(&sample, &DerivationConfig::default());
        let expected: BTreeSet<FileFeature> = [
            FileFeature::Tls,
            FileFeature::Relocations,
            FileFeature::Resources,
            FileFeature::NonstandardMz,
            FileFeature::UrlStrings,
        ]
        .into_iter()
        .collect();
        assert_eq!(features, expected);
    }

    #[test]
    fn minimal_sample_features() {
        let line = format!(r#"{{"sha256":"{}","label":0}}"#, "0".repeat(64));
        let sample = parse_sample(&line).unwrap();
        let features = derive_file_features(&sample, &DerivationConfig::default());
        let expected: BTreeSet<FileFeature> =
            [FileFeature::LowImportsCount, FileFeature::NonstandardMz]
                .into_iter()
                .collect();
        assert_eq!(features, expected);
        assert!(entry_point_unresolved(&sample));
    }

    #[test]
    fn import_threshold_boundary() {
        let cfg = DerivationConfig::default();
        for (imports, expected) in [(9u64, true), (10, false)] {
            let line = format!(
                r#"{{"sha256":"{}","label":0,"general":{{"imports":{imports}}},"strings":{{"MZ":1}}}}"#,
                "1".repeat(64)
            );
            let sample = parse_sample(&line).unwrap();
            let features = derive_file_features(&sample, &cfg);
            assert_eq!(
                features.contains(&FileFeature::LowImportsCount),
                expected,
                "imports={imports}"
            );
        }
    }

    #[test]
    fn multiple_executable_sections() {
        let line = format!(
            r#"{{"sha256":"{}","label":0,"strings":{{"MZ":1}},"general":{{"imports":10}},"section":{{"entry":"a","sections":[{{"name":"a","entropy":1.0,"props":["MEM_EXECUTE"]}},{{"name":"b","entropy":1.0,"props":["MEM_EXECUTE"]}}]}}}}"#,
            "2".repeat(64)
        );
        let sample = parse_sample(&line).unwrap();
        let features = derive_file_features(&sample, &DerivationConfig::default());
        assert!(features.contains(&FileFeature::MultipleExecutableSections));
        assert!(!features.contains(&FileFeature::NonexecutableEntryPoint));
    }

    #[test]
    fn nonexecutable_entry_point() {
        let line = format!(
            r#"{{"sha256":"{}","label":0,"section":{{"entry":"d","sections":[{{"name":"d","entropy":1.0,"props":["CNT_INITIALIZED_DATA","MEM_READ"]}}]}}}}"#,
            "3".repeat(64)
        );
        let sample = parse_sample(&line).unwrap();
        assert!(!entry_point_unresolved(&sample));
        let features = derive_file_features(&sample, &DerivationConfig::default());
        assert!(features.contains(&FileFeature::NonexecutableEntryPoint));
    }

    #[test]
    fn clr_requires_nonempty_directory() {
        let base = format!(
            r#"{{"sha256":"{}","label":0,"datadirectories":[{{"name":"CLR_RUNTIME_HEADER","virtual_address":VA}}]}}"#,
            "4".repeat(64)
        );
        let with = parse_sample(&base.replace("VA", "8192")).unwrap();
        assert!(derive_file_features(&with, &DerivationConfig::default())
            .contains(&FileFeature::Clr));
        let without = parse_sample(&base.replace("VA", "0")).unwrap();
        assert!(!derive_file_features(&without, &DerivationConfig::default())
            .contains(&FileFeature::Clr));
    }

    #[test]
    fn threshold_monotonicity() {
        let sample = parse_sample(LISTING_LINE).unwrap();
        let mut cfg = DerivationConfig::default();
        let mut previous_high = true;
        for threshold in [1.0, 3.0, 6.0, 6.6, 7.5] {
            cfg.entropy_threshold = threshold;
            let section = &sample.section.sections[0];
            let flags = derive_section_flags(section);
            let high = derive_section_features(section, &flags, &cfg)
                .contains(&SectionFeature::HighEntropy);
            assert!(previous_high || !high, "raising threshold added HighEntropy");
            previous_high = high;
        }

        let mut previous_low = false;
        for threshold in [1, 5, 17, 18, 100] {
            cfg.imports_threshold = threshold;
            let low = derive_file_features(&sample, &cfg).contains(&FileFeature::LowImportsCount);
            assert!(!previous_low || low, "raising threshold removed LowImportsCount");
            previous_low = low;
        }
    }
}
