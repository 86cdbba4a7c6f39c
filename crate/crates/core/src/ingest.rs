//! Parsing and streaming of EMBER-style JSON-Lines records.
//!
//! One line of input is one JSON object describing the statically extracted
//! features of a single PE file. Only the fields that feed the ontology are
//! retained; numeric-vector fields such as `histogram`, `byteentropy` and
//! `printabledist` are ignored here (the fractional-dataset writer copies
//! original lines verbatim, so nothing is lost downstream).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Label values: -1 unlabeled, 0 benign, 1 malware.
pub type Label = i8;

/// One parsed EMBER-style record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub sha256: String,
    pub md5: Option<String>,
    pub appeared: Option<String>,
    pub label: Label,
    pub avclass: Option<String>,
    pub general: GeneralInfo,
    pub strings: StringStats,
    pub header: HeaderInfo,
    pub section: SectionTable,
    /// DLL name -> imported function names, as listed in the record.
    pub imports: BTreeMap<String, Vec<String>>,
    pub exports: Vec<String>,
    pub datadirectories: Vec<DataDirectoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GeneralInfo {
    pub size: u64,
    pub vsize: u64,
    pub has_debug: u8,
    pub exports: u64,
    pub imports: u64,
    pub has_relocations: u8,
    pub has_resources: u8,
    pub has_signature: u8,
    pub has_tls: u8,
    pub symbols: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StringStats {
    pub numstrings: u64,
    pub avlength: f64,
    pub printables: u64,
    pub entropy: f64,
    pub paths: u64,
    pub urls: u64,
    pub registry: u64,
    #[serde(rename = "MZ")]
    pub mz: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HeaderInfo {
    pub coff_timestamp: i64,
    pub coff_machine: String,
    pub coff_characteristics: Vec<String>,
    pub optional_subsystem: String,
    pub optional_magic: String,
    pub dll_characteristics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionEntry {
    pub name: String,
    pub size: u64,
    pub vsize: u64,
    /// Shannon entropy of the section bytes, clamped into [0, 8].
    pub entropy: f64,
    pub props: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SectionTable {
    /// Name of the entry-point section; may be empty.
    pub entry: String,
    pub sections: Vec<SectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataDirectoryEntry {
    pub name: String,
    pub virtual_address: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
}

/// Why one input line failed to parse.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("missing required field `{0}`")]
    MissingRequiredField(&'static str),
    #[error("field `{field}` has the wrong type or value: expected {expected}")]
    FieldTypeMismatch {
        field: String,
        expected: &'static str,
    },
}

/// A parse failure tagged with its 1-based line number.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Counts reported after a streaming pass: `ok` parsed records and
/// `skipped` undecodable lines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub ok: u64,
    pub skipped: u64,
}

fn mismatch(field: &str, expected: &'static str) -> ParseErrorKind {
    ParseErrorKind::FieldTypeMismatch {
        field: field.to_string(),
        expected,
    }
}

fn as_obj<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>, ParseErrorKind> {
    v.as_object().ok_or_else(|| mismatch(field, "object"))
}

fn get_u64(obj: &Map<String, Value>, field: &str) -> Result<u64, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(0),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| mismatch(field, "non-negative integer")),
    }
}

fn get_i64(obj: &Map<String, Value>, field: &str) -> Result<i64, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(0),
        Some(v) => v.as_i64().ok_or_else(|| mismatch(field, "integer")),
    }
}

fn get_flag(obj: &Map<String, Value>, field: &str) -> Result<u8, ParseErrorKind> {
    match get_u64(obj, field)? {
        v @ (0 | 1) => Ok(v as u8),
        _ => Err(mismatch(field, "0/1 flag")),
    }
}

fn get_f64(obj: &Map<String, Value>, field: &str) -> Result<f64, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(0.0),
        Some(v) => {
            let x = v.as_f64().ok_or_else(|| mismatch(field, "number"))?;
            if x.is_finite() && x >= 0.0 {
                Ok(x)
            } else {
                Err(mismatch(field, "non-negative number"))
            }
        }
    }
}

fn get_string(obj: &Map<String, Value>, field: &str) -> Result<String, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(v) => v
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| mismatch(field, "string")),
    }
}

fn get_opt_string(obj: &Map<String, Value>, field: &str) -> Result<Option<String>, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_str()
            .map(|s| Some(s.to_string()))
            .ok_or_else(|| mismatch(field, "string")),
    }
}

fn get_string_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<String>, ParseErrorKind> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| {
                item.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| mismatch(field, "list of strings"))
            })
            .collect(),
        Some(_) => Err(mismatch(field, "list of strings")),
    }
}

fn parse_general(v: &Value) -> Result<GeneralInfo, ParseErrorKind> {
    let obj = as_obj(v, "general")?;
    Ok(GeneralInfo {
        size: get_u64(obj, "size")?,
        vsize: get_u64(obj, "vsize")?,
        has_debug: get_flag(obj, "has_debug")?,
        exports: get_u64(obj, "exports")?,
        imports: get_u64(obj, "imports")?,
        has_relocations: get_flag(obj, "has_relocations")?,
        has_resources: get_flag(obj, "has_resources")?,
        has_signature: get_flag(obj, "has_signature")?,
        has_tls: get_flag(obj, "has_tls")?,
        symbols: get_u64(obj, "symbols")?,
    })
}

fn parse_strings(v: &Value) -> Result<StringStats, ParseErrorKind> {
    let obj = as_obj(v, "strings")?;
    Ok(StringStats {
        numstrings: get_u64(obj, "numstrings")?,
        avlength: get_f64(obj, "avlength")?,
        printables: get_u64(obj, "printables")?,
        entropy: get_f64(obj, "entropy")?,
        paths: get_u64(obj, "paths")?,
        urls: get_u64(obj, "urls")?,
        registry: get_u64(obj, "registry")?,
        mz: get_u64(obj, "MZ")?,
    })
}

fn parse_header(v: &Value) -> Result<HeaderInfo, ParseErrorKind> {
    let obj = as_obj(v, "header")?;
    let mut header = HeaderInfo::default();
    if let Some(coff) = obj.get("coff") {
        let coff = as_obj(coff, "header.coff")?;
        header.coff_timestamp = get_i64(coff, "timestamp")?;
        header.coff_machine = get_string(coff, "machine")?;
        header.coff_characteristics = get_string_list(coff, "characteristics")?;
    }
    if let Some(optional) = obj.get("optional") {
        let optional = as_obj(optional, "header.optional")?;
        header.optional_subsystem = get_string(optional, "subsystem")?;
        header.optional_magic = get_string(optional, "magic")?;
        header.dll_characteristics = get_string_list(optional, "dll_characteristics")?;
    }
    Ok(header)
}

fn parse_section_entry(v: &Value, idx: usize) -> Result<SectionEntry, ParseErrorKind> {
    let field = format!("section.sections[{idx}]");
    let obj = as_obj(v, &field)?;
    let mut entropy = match obj.get("entropy") {
        None | Some(Value::Null) => 0.0,
        Some(v) => v
            .as_f64()
            .ok_or_else(|| mismatch(&format!("{field}.entropy"), "number"))?,
    };
    if !entropy.is_finite() {
        return Err(mismatch(&format!("{field}.entropy"), "finite number"));
    }
    // Real-world extractors occasionally emit values a hair outside the
    // byte-entropy bound (for example 8.000001); clamp instead of rejecting.
    if !(0.0..=8.0).contains(&entropy) {
        log::warn!("clamping out-of-range section entropy {entropy} into [0, 8]");
        entropy = entropy.clamp(0.0, 8.0);
    }
    Ok(SectionEntry {
        name: get_string(obj, "name")?,
        size: get_u64(obj, "size")?,
        vsize: get_u64(obj, "vsize")?,
        entropy,
        props: get_string_list(obj, "props")?,
    })
}

fn parse_section_table(v: &Value) -> Result<SectionTable, ParseErrorKind> {
    let obj = as_obj(v, "section")?;
    let sections = match obj.get("sections") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(idx, item)| parse_section_entry(item, idx))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(mismatch("section.sections", "array")),
    };
    Ok(SectionTable {
        entry: get_string(obj, "entry")?,
        sections,
    })
}

fn parse_imports(v: &Value) -> Result<BTreeMap<String, Vec<String>>, ParseErrorKind> {
    let obj = as_obj(v, "imports")?;
    let mut imports = BTreeMap::new();
    for (dll, functions) in obj {
        let functions = match functions {
            Value::Array(items) => items
                .iter()
                .map(|item| {
                    item.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| mismatch(&format!("imports.{dll}"), "list of strings"))
                })
                .collect::<Result<Vec<_>, _>>()?,
            _ => return Err(mismatch(&format!("imports.{dll}"), "list of strings")),
        };
        imports.insert(dll.clone(), functions);
    }
    Ok(imports)
}

fn parse_datadirectories(v: &Value) -> Result<Vec<DataDirectoryEntry>, ParseErrorKind> {
    let items = match v {
        Value::Array(items) => items,
        _ => return Err(mismatch("datadirectories", "array")),
    };
    items
        .iter()
        .enumerate()
        .map(|(idx, item)| {
            let field = format!("datadirectories[{idx}]");
            let obj = as_obj(item, &field)?;
            let size = match obj.get("size") {
                None | Some(Value::Null) => None,
                Some(v) => Some(
                    v.as_u64()
                        .ok_or_else(|| mismatch(&format!("{field}.size"), "non-negative integer"))?,
                ),
            };
            Ok(DataDirectoryEntry {
                name: get_string(obj, "name")?,
                virtual_address: get_u64(obj, "virtual_address")?,
                size,
            })
        })
        .collect()
}

/// Parses one JSON-Lines record.
///
/// `sha256` is required (lowercased and checked against `[0-9a-f]{64}`).
/// An absent `label` means unlabeled (-1); a present one must be -1, 0 or 1.
/// All other fields default to empty/zero when absent.
pub fn parse_sample(line: &str) -> Result<RawSample, ParseErrorKind> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| ParseErrorKind::MalformedJson(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ParseErrorKind::MalformedJson("top-level value is not an object".into()))?;

    let sha256 = match obj.get("sha256") {
        None | Some(Value::Null) => {
            return Err(ParseErrorKind::MissingRequiredField("sha256"));
        }
        Some(v) => v
            .as_str()
            .ok_or_else(|| mismatch("sha256", "string"))?
            .to_ascii_lowercase(),
    };
    if sha256.len() != 64 || !sha256.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
        return Err(mismatch("sha256", "64-character lowercase hex string"));
    }

    let label = match obj.get("label") {
        None | Some(Value::Null) => -1,
        Some(v) => match v.as_i64() {
            Some(l @ -1..=1) => l as Label,
            _ => return Err(mismatch("label", "integer in {-1, 0, 1}")),
        },
    };

    Ok(RawSample {
        sha256,
        md5: get_opt_string(obj, "md5")?,
        appeared: get_opt_string(obj, "appeared")?,
        label,
        avclass: get_opt_string(obj, "avclass")?,
        general: obj
            .get("general")
            .map(parse_general)
            .transpose()?
            .unwrap_or_default(),
        strings: obj
            .get("strings")
            .map(parse_strings)
            .transpose()?
            .unwrap_or_default(),
        header: obj
            .get("header")
            .map(parse_header)
            .transpose()?
            .unwrap_or_default(),
        section: obj
            .get("section")
            .map(parse_section_table)
            .transpose()?
            .unwrap_or_default(),
        imports: obj
            .get("imports")
            .map(parse_imports)
            .transpose()?
            .unwrap_or_default(),
        exports: get_string_list(obj, "exports")?,
        datadirectories: obj
            .get("datadirectories")
            .map(parse_datadirectories)
            .transpose()?
            .unwrap_or_default(),
    })
}

impl RawSample {
    /// Re-serializes the retained fields in the input schema's shape, with
    /// lexicographically sorted keys. `parse_sample` accepts the output and
    /// reconstructs an identical sample.
    pub fn to_canonical_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("sha256".into(), json!(self.sha256));
        if let Some(md5) = &self.md5 {
            obj.insert("md5".into(), json!(md5));
        }
        if let Some(appeared) = &self.appeared {
            obj.insert("appeared".into(), json!(appeared));
        }
        obj.insert("label".into(), json!(self.label));
        if let Some(avclass) = &self.avclass {
            obj.insert("avclass".into(), json!(avclass));
        }
        obj.insert(
            "general".into(),
            serde_json::to_value(&self.general).expect("general serializes"),
        );
        obj.insert(
            "strings".into(),
            serde_json::to_value(&self.strings).expect("strings serializes"),
        );
        obj.insert(
            "header".into(),
            json!({
                "coff": {
                    "timestamp": self.header.coff_timestamp,
                    "machine": self.header.coff_machine,
                    "characteristics": self.header.coff_characteristics,
                },
                "optional": {
                    "subsystem": self.header.optional_subsystem,
                    "magic": self.header.optional_magic,
                    "dll_characteristics": self.header.dll_characteristics,
                },
            }),
        );
        obj.insert(
            "section".into(),
            serde_json::to_value(&self.section).expect("section serializes"),
        );
        obj.insert("imports".into(), json!(self.imports));
        obj.insert("exports".into(), json!(self.exports));
        obj.insert(
            "datadirectories".into(),
            serde_json::to_value(&self.datadirectories).expect("datadirectories serialize"),
        );
        Value::Object(obj)
    }
}

/// Streaming reader over a JSON-Lines file.
///
/// Yields `(line_number, parse result)` pairs in file order while holding at
/// most one line in memory; blank lines are skipped. Failed lines are
/// reported, not fatal, and tallied in [`SampleStream::report`].
pub struct SampleStream<R: BufRead> {
    reader: R,
    line_no: usize,
    buf: String,
    report: IngestReport,
    done: bool,
}

impl SampleStream<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(SampleStream::new(BufReader::new(file)))
    }
}

impl<R: BufRead> SampleStream<R> {
    pub fn new(reader: R) -> Self {
        SampleStream {
            reader,
            line_no: 0,
            buf: String::new(),
            report: IngestReport::default(),
            done: false,
        }
    }

    /// Counts accumulated so far; final once the iterator returns `None`.
    pub fn report(&self) -> IngestReport {
        self.report
    }

    /// Yields the raw text of the next non-blank line, without parsing.
    /// Used where the verbatim input line itself is the payload.
    pub fn next_raw_line(&mut self) -> Option<std::io::Result<(usize, String)>> {
        loop {
            if self.done {
                return None;
            }
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {
                    self.line_no += 1;
                    let trimmed = self.buf.trim();
                    if trimmed.is_empty() {
                        continue;
                    }
                    return Some(Ok((self.line_no, trimmed.to_string())));
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

impl<R: BufRead> Iterator for SampleStream<R> {
    type Item = (usize, Result<RawSample, ParseError>);

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_raw_line()? {
            Ok((line, text)) => match parse_sample(&text) {
                Ok(sample) => {
                    self.report.ok += 1;
                    Some((line, Ok(sample)))
                }
                Err(kind) => {
                    self.report.skipped += 1;
                    Some((line, Err(ParseError { line, kind })))
                }
            },
            Err(e) => {
                self.report.skipped += 1;
                let line = self.line_no + 1;
                Some((
                    line,
                    Err(ParseError {
                        line,
                        kind: ParseErrorKind::MalformedJson(format!("I/O error: {e}")),
                    }),
                ))
            }
        }
    }
}

/// Opens `path` as a stream of parsed samples.
pub fn stream_samples(path: &Path) -> Result<SampleStream<BufReader<File>>, IngestError> {
    SampleStream::open(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const LISTING_LINE: &str = include_str!("../tests/data/listing1.json");

    #[test]
    fn parses_listing_fixture() {
        let s = parse_sample(LISTING_LINE).unwrap();
        assert_eq!(
            s.sha256,
            "eb87d82ad7bdc1b753bf91858d2986063ebd8aabeb8e7e91c0c78db21982a0d6"
        );
        assert_eq!(s.md5.as_deref(), Some("aba129a3d1ba9d307dad05617f66d8e7"));
        assert_eq!(s.label, 1);
        assert_eq!(s.avclass.as_deref(), Some("fareit"));
        assert_eq!(s.general.imports, 17);
        assert_eq!(s.general.has_tls, 1);
        assert_eq!(s.strings.mz, 11);
        assert_eq!(s.strings.urls, 9);
        assert_eq!(s.section.entry, "CODE");
        assert_eq!(s.section.sections.len(), 1);
        let code = &s.section.sections[0];
        assert_eq!(code.name, "CODE");
        assert_eq!(code.entropy, 6.532932639432919);
        assert_eq!(code.props, ["CNT_CODE", "MEM_EXECUTE", "MEM_READ"]);
        assert_eq!(s.imports["kernel32.dll"].len(), 3);
        assert!(s.exports.is_empty());
        assert_eq!(s.datadirectories[0].name, "EXPORT_TABLE");
    }

    #[test]
    fn minimal_record_defaults() {
        let line = format!(r#"{{"sha256":"{}","label":0}}"#, "0".repeat(64));
        let s = parse_sample(&line).unwrap();
        assert_eq!(s.label, 0);
        assert_eq!(s.general, GeneralInfo::default());
        assert_eq!(s.strings, StringStats::default());
        assert!(s.section.sections.is_empty());
        assert!(s.imports.is_empty());
        assert!(s.datadirectories.is_empty());
    }

    #[test]
    fn missing_sha256_is_required_field_error() {
        assert_eq!(
            parse_sample(r#"{"label":1}"#).unwrap_err(),
            ParseErrorKind::MissingRequiredField("sha256")
        );
    }

    #[test]
    fn absent_label_means_unlabeled() {
        let line = format!(r#"{{"sha256":"{}"}}"#, "a".repeat(64));
        assert_eq!(parse_sample(&line).unwrap().label, -1);
    }

    #[test]
    fn textual_label_is_type_mismatch() {
        let line = format!(r#"{{"sha256":"{}","label":"malware"}}"#, "a".repeat(64));
        assert!(matches!(
            parse_sample(&line).unwrap_err(),
            ParseErrorKind::FieldTypeMismatch { field, .. } if field == "label"
        ));
    }

    #[test]
    fn sha256_is_lowercased_and_validated() {
        let line = format!(r#"{{"sha256":"{}","label":0}}"#, "A".repeat(64));
        assert_eq!(parse_sample(&line).unwrap().sha256, "a".repeat(64));
        let bad = format!(r#"{{"sha256":"{}","label":0}}"#, "z".repeat(64));
        assert!(parse_sample(&bad).is_err());
        let short = format!(r#"{{"sha256":"{}","label":0}}"#, "a".repeat(63));
        assert!(parse_sample(&short).is_err());
    }

    #[test]
    fn out_of_range_entropy_is_clamped() {
        let line = format!(
            r#"{{"sha256":"{}","label":0,"section":{{"entry":"","sections":[{{"name":".x","entropy":8.000001,"props":[]}}]}}}}"#,
            "b".repeat(64)
        );
        let s = parse_sample(&line).unwrap();
        assert_eq!(s.section.sections[0].entropy, 8.0);
    }

    #[test]
    fn flags_outside_zero_one_are_rejected() {
        let line = format!(
            r#"{{"sha256":"{}","label":0,"general":{{"has_debug":2}}}}"#,
            "c".repeat(64)
        );
        assert!(parse_sample(&line).is_err());
    }

    #[test]
    fn canonical_roundtrip_is_identity() {
        let s = parse_sample(LISTING_LINE).unwrap();
        let canon = serde_json::to_string(&s.to_canonical_json()).unwrap();
        let s2 = parse_sample(&canon).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn stream_recovers_after_bad_lines() {
        let a = format!(r#"{{"sha256":"{}","label":0}}"#, "a".repeat(64));
        let c = format!(r#"{{"sha256":"{}","label":1}}"#, "c".repeat(64));
        let data = format!("{a}\nnot json\n{c}\n");
        let mut stream = SampleStream::new(data.as_bytes());
        let first = stream.next().unwrap();
        assert!(first.1.is_ok());
        let second = stream.next().unwrap();
        assert_eq!(second.0, 2);
        assert!(second.1.is_err());
        let third = stream.next().unwrap();
        assert!(third.1.is_ok());
        assert!(stream.next().is_none());
        assert_eq!(stream.report(), IngestReport { ok: 2, skipped: 1 });
    }

    #[test]
    fn empty_file_reports_zeros() {
        let mut stream = SampleStream::new("".as_bytes());
        assert!(stream.next().is_none());
        assert_eq!(stream.report(), IngestReport { ok: 0, skipped: 0 });
    }

    #[test]
    fn parse_is_order_independent() {
        let a = format!(r#"{{"sha256":"{}","label":0}}"#, "a".repeat(64));
        let direct = parse_sample(&a).unwrap();
        let data = format!("{LISTING_LINE}\n{a}\n");
        let streamed: Vec<_> = SampleStream::new(data.as_bytes())
            .filter_map(|(_, r)| r.ok())
            .collect();
        assert_eq!(streamed[1], direct);
    }
}
