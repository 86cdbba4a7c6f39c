//! The PE malware vocabulary: class hierarchy, properties, prototypical
//! instances and the action catalog, loaded from bundled JSON data files.
//!
//! The hierarchy is a forest of six trees (PEFile, Section, FileFeature,
//! SectionFeature, SectionFlag, Action). Feature, flag and action-leaf
//! classes each carry a single prototypical instance that ABox individuals
//! link to. Derived feature classes additionally carry a `derived_as`
//! annotation holding their defining class expression in Manchester syntax;
//! threshold placeholders in the bundled files are substituted from the
//! active [`DerivationConfig`] so the annotations always describe the rules
//! actually applied.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;
use thiserror::Error;

use crate::features::DerivationConfig;
use crate::rdf::term::{escape_string, format_double, Namespaces, Term, Triple};
use crate::rdf::write::to_turtle;

const CLASSES_JSON: &str = include_str!("../data/classes.json");
const ACTIONS_JSON: &str = include_str!("../data/actions.json");
const PROPERTIES_JSON: &str = include_str!("../data/properties.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassKind {
    /// PEFile and its two subclasses.
    File,
    /// Section and its three subclasses.
    Section,
    /// The four tree tops: FileFeature, SectionFeature, SectionFlag, Action.
    Root,
    FileFeature,
    SectionFeature,
    SectionFlag,
    ActionCategory,
    ActionLeaf,
}

impl ClassKind {
    fn parse(s: &str) -> Option<ClassKind> {
        Some(match s {
            "file" => ClassKind::File,
            "section" => ClassKind::Section,
            "root" => ClassKind::Root,
            "file-feature" => ClassKind::FileFeature,
            "section-feature" => ClassKind::SectionFeature,
            "section-flag" => ClassKind::SectionFlag,
            "action-category" => ClassKind::ActionCategory,
            "action-leaf" => ClassKind::ActionLeaf,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ClassDef {
    pub name: String,
    pub parent: Option<String>,
    pub kind: ClassKind,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ObjectPropertyDef {
    pub name: String,
    pub domain: String,
    pub range: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataRange {
    Integer,
    Double,
    Str,
}

impl DataRange {
    pub fn xsd_local(self) -> &'static str {
        match self {
            DataRange::Integer => "integer",
            DataRange::Double => "double",
            DataRange::Str => "string",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataPropertyDef {
    pub name: String,
    pub domain: String,
    pub range: DataRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionOrigin {
    Maec,
    Extension,
}

/// One leaf action from the bundled catalog.
#[derive(Debug, Clone)]
pub struct ActionCatalogEntry {
    pub id: String,
    pub leaf_class: String,
    pub category: String,
    pub origin: ActionOrigin,
}

#[derive(Debug, Error)]
pub enum VocabularyError {
    #[error("vocabulary data is corrupt: {0}")]
    Corrupt(String),
    #[error("vocabulary is invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
}

/// The complete schema, immutable after load.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    classes: BTreeMap<String, ClassDef>,
    object_properties: Vec<ObjectPropertyDef>,
    data_properties: Vec<DataPropertyDef>,
    annotation_properties: Vec<String>,
    /// class name -> prototypical instance local name
    prototypes: BTreeMap<String, String>,
    /// prototypical instance local name -> class name
    prototype_classes: BTreeMap<String, String>,
    /// derived feature class name -> Manchester expression text
    derived_annotations: BTreeMap<String, String>,
    /// action id -> catalog entry
    actions: BTreeMap<String, ActionCatalogEntry>,
}

#[derive(Debug, Deserialize)]
struct RawClass {
    name: String,
    parent: Option<String>,
    kind: String,
    #[serde(default)]
    derived_as: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ClassesFile {
    classes: Vec<RawClass>,
}

#[derive(Debug, Deserialize)]
struct RawAction {
    id: String,
    category: String,
    origin: String,
}

#[derive(Debug, Deserialize)]
struct ActionsFile {
    categories: Vec<String>,
    actions: Vec<RawAction>,
}

#[derive(Debug, Deserialize)]
struct RawDataProperty {
    name: String,
    domain: String,
    range: String,
}

#[derive(Debug, Deserialize)]
struct PropertiesFile {
    object_properties: Vec<ObjectPropertyDef>,
    data_properties: Vec<RawDataProperty>,
    annotation_properties: Vec<String>,
}

/// PascalCase form of a kebab-case identifier: `create-process` becomes
/// `CreateProcess`.
pub fn pascal_case(kebab: &str) -> String {
    let mut out = String::with_capacity(kebab.len());
    for part in kebab.split('-') {
        let mut chars = part.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.push_str(chars.as_str());
        }
    }
    out
}

/// snake_case form of a class name, keeping acronym runs together:
/// `URLStrings` becomes `url_strings`, `NonstandardMZ` becomes
/// `nonstandard_mz`, `TLS` becomes `tls`.
pub fn snake_case(name: &str) -> String {
    let chars: Vec<char> = name.chars().collect();
    let mut out = String::with_capacity(name.len() + 4);
    for (i, &c) in chars.iter().enumerate() {
        if c.is_uppercase() && i > 0 {
            let prev = chars[i - 1];
            let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                out.push('_');
            }
        }
        out.extend(c.to_lowercase());
    }
    out
}

fn substitute_template(template: &str, cfg: &DerivationConfig) -> String {
    let names = cfg
        .standard_section_names
        .iter()
        .map(|n| format!("\"{}\"", escape_string(n)))
        .collect::<Vec<_>>()
        .join(", ");
    template
        .replace("${imports_threshold}", &cfg.imports_threshold.to_string())
        .replace("${entropy_threshold}", &format_double(cfg.entropy_threshold))
        .replace("${standard_section_names}", &format!("{{ {names} }}"))
}

impl Vocabulary {
    /// Loads the bundled vocabulary with default thresholds.
    pub fn builtin() -> Result<Vocabulary, VocabularyError> {
        Vocabulary::with_config(&DerivationConfig::default())
    }

    /// Loads the bundled vocabulary, substituting the configuration's
    /// thresholds and standard-name list into the derived-feature
    /// annotations.
    pub fn with_config(cfg: &DerivationConfig) -> Result<Vocabulary, VocabularyError> {
        Vocabulary::from_json_parts(CLASSES_JSON, ACTIONS_JSON, PROPERTIES_JSON, cfg)
    }

    /// Builds a vocabulary from user-supplied data files in the bundled
    /// formats. The result is validated; any violation is an error.
    pub fn from_json_parts(
        classes_json: &str,
        actions_json: &str,
        properties_json: &str,
        cfg: &DerivationConfig,
    ) -> Result<Vocabulary, VocabularyError> {
        let corrupt = |e: serde_json::Error| VocabularyError::Corrupt(e.to_string());
        let classes_file: ClassesFile = serde_json::from_str(classes_json).map_err(corrupt)?;
        let actions_file: ActionsFile = serde_json::from_str(actions_json).map_err(corrupt)?;
        let properties_file: PropertiesFile =
            serde_json::from_str(properties_json).map_err(corrupt)?;

        let mut classes = BTreeMap::new();
        let mut derived_annotations = BTreeMap::new();
        for raw in classes_file.classes {
            let kind = ClassKind::parse(&raw.kind).ok_or_else(|| {
                VocabularyError::Corrupt(format!("class {}: unknown kind {}", raw.name, raw.kind))
            })?;
            if let Some(template) = raw.derived_as {
                derived_annotations.insert(raw.name.clone(), substitute_template(&template, cfg));
            }
            if classes
                .insert(
                    raw.name.clone(),
                    ClassDef {
                        name: raw.name.clone(),
                        parent: raw.parent,
                        kind,
                    },
                )
                .is_some()
            {
                return Err(VocabularyError::Corrupt(format!(
                    "duplicate class {}",
                    raw.name
                )));
            }
        }

        for category in &actions_file.categories {
            classes.insert(
                category.clone(),
                ClassDef {
                    name: category.clone(),
                    parent: Some("Action".into()),
                    kind: ClassKind::ActionCategory,
                },
            );
        }
        let mut actions = BTreeMap::new();
        for raw in actions_file.actions {
            let origin = match raw.origin.as_str() {
                "maec" => ActionOrigin::Maec,
                "extension" => ActionOrigin::Extension,
                other => {
                    return Err(VocabularyError::Corrupt(format!(
                        "action {}: unknown origin {other}",
                        raw.id
                    )))
                }
            };
            let leaf_class = pascal_case(&raw.id);
            classes.insert(
                leaf_class.clone(),
                ClassDef {
                    name: leaf_class.clone(),
                    parent: Some(raw.category.clone()),
                    kind: ClassKind::ActionLeaf,
                },
            );
            if actions
                .insert(
                    raw.id.clone(),
                    ActionCatalogEntry {
                        id: raw.id.clone(),
                        leaf_class,
                        category: raw.category,
                        origin,
                    },
                )
                .is_some()
            {
                return Err(VocabularyError::Corrupt(format!(
                    "duplicate action id {}",
                    raw.id
                )));
            }
        }

        let data_properties = properties_file
            .data_properties
            .into_iter()
            .map(|raw| {
                let range = match raw.range.as_str() {
                    "integer" => DataRange::Integer,
                    "double" => DataRange::Double,
                    "string" => DataRange::Str,
                    other => {
                        return Err(VocabularyError::Corrupt(format!(
                            "data property {}: unknown range {other}",
                            raw.name
                        )))
                    }
                };
                Ok(DataPropertyDef {
                    name: raw.name,
                    domain: raw.domain,
                    range,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        // Prototypical instances: snake_case class name for features and
        // flags, the action id itself for action leaves.
        let mut prototypes = BTreeMap::new();
        let mut prototype_classes = BTreeMap::new();
        for def in classes.values() {
            let proto = match def.kind {
                ClassKind::FileFeature | ClassKind::SectionFeature | ClassKind::SectionFlag => {
                    snake_case(&def.name)
                }
                _ => continue,
            };
            prototypes.insert(def.name.clone(), proto.clone());
            prototype_classes.insert(proto, def.name.clone());
        }
        for entry in actions.values() {
            prototypes.insert(entry.leaf_class.clone(), entry.id.clone());
            prototype_classes.insert(entry.id.clone(), entry.leaf_class.clone());
        }

        let vocab = Vocabulary {
            classes,
            object_properties: properties_file.object_properties,
            data_properties,
            annotation_properties: properties_file.annotation_properties,
            prototypes,
            prototype_classes,
            derived_annotations,
            actions,
        };
        let violations = vocab.validate();
        if violations.is_empty() {
            Ok(vocab)
        } else {
            Err(VocabularyError::Invalid(violations))
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.classes.values()
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.get(name)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn count_of_kind(&self, kind: ClassKind) -> usize {
        self.classes.values().filter(|c| c.kind == kind).count()
    }

    pub fn object_properties(&self) -> &[ObjectPropertyDef] {
        &self.object_properties
    }

    pub fn object_property(&self, name: &str) -> Option<&ObjectPropertyDef> {
        self.object_properties.iter().find(|p| p.name == name)
    }

    pub fn data_properties(&self) -> &[DataPropertyDef] {
        &self.data_properties
    }

    pub fn data_property(&self, name: &str) -> Option<&DataPropertyDef> {
        self.data_properties.iter().find(|p| p.name == name)
    }

    pub fn annotation_properties(&self) -> &[String] {
        &self.annotation_properties
    }

    /// Prototypical instance local name for a feature/flag/action class.
    pub fn prototype_of(&self, class_name: &str) -> Option<&str> {
        self.prototypes.get(class_name).map(String::as_str)
    }

    /// Class of a prototypical instance local name.
    pub fn class_of_prototype(&self, instance: &str) -> Option<&str> {
        self.prototype_classes.get(instance).map(String::as_str)
    }

    pub fn prototypes(&self) -> impl Iterator<Item = (&str, &str)> {
        self.prototypes.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    pub fn derived_annotations(&self) -> &BTreeMap<String, String> {
        &self.derived_annotations
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionCatalogEntry> {
        self.actions.values()
    }

    pub fn action(&self, id: &str) -> Option<&ActionCatalogEntry> {
        self.actions.get(id)
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// Walks parents from `name` up to its tree top, excluding `name`.
    pub fn ancestors<'a>(&'a self, name: &str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let mut current = self.classes.get(name);
        while let Some(def) = current {
            match &def.parent {
                Some(parent) => {
                    out.push(parent.as_str());
                    current = self.classes.get(parent.as_str());
                }
                None => break,
            }
        }
        out
    }

    /// All classes in the subtree rooted at `name`, including `name`.
    pub fn descendants<'a>(&'a self, name: &str) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        if !self.classes.contains_key(name) {
            return out;
        }
        out.insert(self.classes.get_key_value(name).unwrap().0.as_str());
        // Small forest; a fixpoint pass is simpler than building child maps.
        loop {
            let before = out.len();
            for def in self.classes.values() {
                if let Some(parent) = &def.parent {
                    if out.contains(parent.as_str()) {
                        out.insert(def.name.as_str());
                    }
                }
            }
            if out.len() == before {
                break;
            }
        }
        out
    }

    /// Checks every structural invariant; returns one message per violation.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        let expected_counts = [
            (ClassKind::File, 3),
            (ClassKind::Section, 4),
            (ClassKind::Root, 4),
            (ClassKind::FileFeature, 15),
            (ClassKind::SectionFeature, 3),
            (ClassKind::SectionFlag, 4),
            (ClassKind::ActionCategory, 17),
            (ClassKind::ActionLeaf, 139),
        ];
        for (kind, expected) in expected_counts {
            let actual = self.count_of_kind(kind);
            if actual != expected {
                violations.push(format!(
                    "expected {expected} classes of kind {kind:?}, found {actual}"
                ));
            }
        }

        // Tree shape: every parent exists, no cycles, roots are parentless.
        for def in self.classes.values() {
            match &def.parent {
                Some(parent) if !self.classes.contains_key(parent) => {
                    violations.push(format!("class {}: unknown parent {parent}", def.name));
                }
                None if !matches!(def.kind, ClassKind::Root | ClassKind::File | ClassKind::Section) => {
                    violations.push(format!("class {}: missing parent", def.name));
                }
                None if matches!(def.kind, ClassKind::File | ClassKind::Section)
                    && def.name != "PEFile"
                    && def.name != "Section" =>
                {
                    violations.push(format!("class {}: missing parent", def.name));
                }
                _ => {}
            }
            let mut seen = BTreeSet::new();
            let mut cur = Some(def.name.as_str());
            while let Some(name) = cur {
                if !seen.insert(name) {
                    violations.push(format!("class {}: cycle through {name}", def.name));
                    break;
                }
                cur = self
                    .classes
                    .get(name)
                    .and_then(|d| d.parent.as_deref());
            }
        }

        for def in self.classes.values() {
            let parent_kind = def
                .parent
                .as_deref()
                .and_then(|p| self.classes.get(p))
                .map(|p| p.kind);
            match def.kind {
                ClassKind::ActionLeaf => {
                    if parent_kind != Some(ClassKind::ActionCategory) {
                        violations.push(format!(
                            "action leaf {} must have an action-category parent",
                            def.name
                        ));
                    }
                }
                ClassKind::ActionCategory => {
                    if def.parent.as_deref() != Some("Action") {
                        violations.push(format!(
                            "action category {} must be a direct subclass of Action",
                            def.name
                        ));
                    }
                }
                ClassKind::FileFeature if def.parent.as_deref() != Some("FileFeature") => {
                    violations.push(format!("{} must be a subclass of FileFeature", def.name));
                }
                ClassKind::SectionFeature if def.parent.as_deref() != Some("SectionFeature") => {
                    violations.push(format!("{} must be a subclass of SectionFeature", def.name));
                }
                ClassKind::SectionFlag if def.parent.as_deref() != Some("SectionFlag") => {
                    violations.push(format!("{} must be a subclass of SectionFlag", def.name));
                }
                _ => {}
            }
        }

        if self.data_properties.len() != 9 {
            violations.push(format!(
                "expected 9 data properties, found {}",
                self.data_properties.len()
            ));
        }
        for prop in &self.data_properties {
            let expected = match prop.name.as_str() {
                "section_entropy" => ("Section", DataRange::Double),
                "section_name" => ("Section", DataRange::Str),
                _ => ("PEFile", DataRange::Integer),
            };
            if prop.domain != expected.0 || prop.range != expected.1 {
                violations.push(format!(
                    "data property {}: expected domain {} and range {}",
                    prop.name,
                    expected.0,
                    expected.1.xsd_local()
                ));
            }
        }
        for prop in &self.object_properties {
            if self.class(&prop.domain).is_none() || self.class(&prop.range).is_none() {
                violations.push(format!(
                    "object property {}: unknown domain or range",
                    prop.name
                ));
            }
        }

        // Prototypes: exactly one per feature, flag and action-leaf class,
        // globally unique.
        for def in self.classes.values() {
            let needs_prototype = matches!(
                def.kind,
                ClassKind::FileFeature
                    | ClassKind::SectionFeature
                    | ClassKind::SectionFlag
                    | ClassKind::ActionLeaf
            );
            if needs_prototype && !self.prototypes.contains_key(&def.name) {
                violations.push(format!("class {}: missing prototypical instance", def.name));
            }
        }
        if self.prototype_classes.len() != self.prototypes.len() {
            violations.push("prototypical instance names are not unique".into());
        }

        // derived_as annotations must cover exactly the derived file
        // features plus every section feature — no more, no fewer.
        let mut expected_derived: BTreeSet<&str> = crate::features::FileFeature::ALL
            .into_iter()
            .filter(|f| f.is_derived())
            .map(|f| f.class_name())
            .collect();
        expected_derived.extend(
            crate::features::SectionFeature::ALL
                .into_iter()
                .map(|f| f.class_name()),
        );
        let annotated: BTreeSet<&str> =
            self.derived_annotations.keys().map(String::as_str).collect();
        for missing in expected_derived.difference(&annotated) {
            violations.push(format!("derived feature {missing}: missing derived_as"));
        }
        for extra in annotated.difference(&expected_derived) {
            violations.push(format!("derived_as on non-derived class {extra}"));
        }

        for entry in self.actions.values() {
            if self.classes.get(&entry.category).map(|d| d.kind) != Some(ClassKind::ActionCategory)
            {
                violations.push(format!(
                    "action {}: category {} is not an action category",
                    entry.id, entry.category
                ));
            }
        }
        let extensions: BTreeSet<&str> = self
            .actions
            .values()
            .filter(|a| a.origin == ActionOrigin::Extension)
            .map(|a| a.id.as_str())
            .collect();
        let expected_ext: BTreeSet<&str> =
            ["decrypt", "encrypt", "generate-key", "send-http-request"]
                .into_iter()
                .collect();
        if extensions != expected_ext {
            violations.push(format!(
                "extension actions must be exactly {expected_ext:?}, found {extensions:?}"
            ));
        }

        violations
    }

    /// Serializes the schema as Turtle: class declarations, subclass axioms,
    /// property declarations with domain and range, prototype assertions and
    /// derived_as annotations. Deterministic.
    pub fn export_tbox(&self, ns: &Namespaces) -> Result<String, VocabularyError> {
        let violations = self.validate();
        if !violations.is_empty() {
            return Err(VocabularyError::Invalid(violations));
        }

        let mut triples = vec![Triple::new(
            Term::Full(ns.ontology_iri().to_string()),
            Term::rdf_type(),
            Term::owl("Ontology"),
        )];
        for name in &self.annotation_properties {
            triples.push(Triple::new(
                Term::peo(name.clone()),
                Term::rdf_type(),
                Term::owl("AnnotationProperty"),
            ));
        }
        for def in self.classes.values() {
            triples.push(Triple::new(
                Term::peo(def.name.clone()),
                Term::rdf_type(),
                Term::owl("Class"),
            ));
            if let Some(parent) = &def.parent {
                triples.push(Triple::new(
                    Term::peo(def.name.clone()),
                    Term::rdfs("subClassOf"),
                    Term::peo(parent.clone()),
                ));
            }
        }
        for (class, expr) in &self.derived_annotations {
            triples.push(Triple::new(
                Term::peo(class.clone()),
                Term::peo("derived_as"),
                Term::Literal(crate::rdf::term::Literal::string(expr)),
            ));
        }
        for prop in &self.object_properties {
            let subject = Term::peo(prop.name.clone());
            triples.push(Triple::new(
                subject.clone(),
                Term::rdf_type(),
                Term::owl("ObjectProperty"),
            ));
            triples.push(Triple::new(
                subject.clone(),
                Term::rdfs("domain"),
                Term::peo(prop.domain.clone()),
            ));
            triples.push(Triple::new(
                subject,
                Term::rdfs("range"),
                Term::peo(prop.range.clone()),
            ));
        }
        for prop in &self.data_properties {
            let subject = Term::peo(prop.name.clone());
            triples.push(Triple::new(
                subject.clone(),
                Term::rdf_type(),
                Term::owl("DatatypeProperty"),
            ));
            triples.push(Triple::new(
                subject.clone(),
                Term::rdfs("domain"),
                Term::peo(prop.domain.clone()),
            ));
            triples.push(Triple::new(
                subject,
                Term::rdfs("range"),
                Term::xsd(prop.range.xsd_local()),
            ));
        }
        for (class, proto) in &self.prototypes {
            triples.push(Triple::new(
                Term::peo(proto.clone()),
                Term::rdf_type(),
                Term::peo(class.clone()),
            ));
        }

        Ok(to_turtle(&triples, ns))
    }
}
