//! ABox serialization and the examples sidecar.
//!
//! Every emitted link targets a prototypical instance declared by the
//! vocabulary. With `include_derived` off, links whose target prototype
//! belongs to a derived feature class are omitted while the underlying data
//! properties stay, so consumers that can express the defining restrictions
//! themselves are not handed the answers twice.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::term::{Literal, Namespaces, Term, Triple};
use super::write::{to_ntriples, to_turtle};
use crate::kb::KnowledgeBase;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RdfFormat {
    #[default]
    Turtle,
    NTriples,
}

#[derive(Debug, Clone)]
pub struct AboxOptions {
    pub include_derived: bool,
    pub format: RdfFormat,
}

impl Default for AboxOptions {
    fn default() -> Self {
        AboxOptions {
            include_derived: true,
            format: RdfFormat::Turtle,
        }
    }
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("knowledge base references unknown prototype for class `{0}`")]
    UnknownPrototype(String),
}

fn prototype_term(vocab: &Vocabulary, class_name: &str) -> Result<Term, EmitError> {
    vocab
        .prototype_of(class_name)
        .map(Term::peo)
        .ok_or_else(|| EmitError::UnknownPrototype(class_name.to_string()))
}

/// Lowers a knowledge base to triples. The ontology header makes each
/// document self-describing: it imports the schema document's IRI.
pub fn abox_triples(
    kb: &KnowledgeBase,
    vocab: &Vocabulary,
    ns: &Namespaces,
    include_derived: bool,
) -> Result<Vec<Triple>, EmitError> {
    let ontology_iri = ns.ontology_iri().to_string();
    let abox_iri = format!("{ontology_iri}/abox");
    let mut triples = vec![
        Triple::new(
            Term::Full(abox_iri.clone()),
            Term::rdf_type(),
            Term::owl("Ontology"),
        ),
        Triple::new(
            Term::Full(abox_iri),
            Term::owl("imports"),
            Term::Full(ontology_iri),
        ),
    ];

    for file in &kb.files {
        let subject = Term::peo(file.local_name());
        triples.push(Triple::new(
            subject.clone(),
            Term::rdf_type(),
            Term::peo(file.file_class.class_name()),
        ));
        for (property, value) in file.data.entries() {
            triples.push(Triple::new(
                subject.clone(),
                Term::peo(property),
                Term::Literal(Literal::integer(value)),
            ));
        }
        for feature in &file.features {
            if !include_derived && feature.is_derived() {
                continue;
            }
            triples.push(Triple::new(
                subject.clone(),
                Term::peo("has_file_feature"),
                prototype_term(vocab, feature.class_name())?,
            ));
        }
        for action in &file.actions {
            let entry = action_prototype(vocab, action)?;
            triples.push(Triple::new(
                subject.clone(),
                Term::peo("has_action"),
                entry,
            ));
        }
        for section in &file.sections {
            let section_subject = Term::peo(file.section_local_name(section.index));
            triples.push(Triple::new(
                subject.clone(),
                Term::peo("has_section"),
                section_subject.clone(),
            ));
            triples.push(Triple::new(
                section_subject.clone(),
                Term::rdf_type(),
                Term::peo(section.section_class.class_name()),
            ));
            triples.push(Triple::new(
                section_subject.clone(),
                Term::peo("section_name"),
                Term::Literal(Literal::string(&section.section_name)),
            ));
            triples.push(Triple::new(
                section_subject.clone(),
                Term::peo("section_entropy"),
                Term::Literal(Literal::double(section.section_entropy)),
            ));
            for flag in &section.flags {
                triples.push(Triple::new(
                    section_subject.clone(),
                    Term::peo("has_section_flag"),
                    prototype_term(vocab, flag.class_name())?,
                ));
            }
            // All three section feature classes are derived.
            if include_derived {
                for feature in &section.features {
                    triples.push(Triple::new(
                        section_subject.clone(),
                        Term::peo("has_section_feature"),
                        prototype_term(vocab, feature.class_name())?,
                    ));
                }
            }
        }
    }
    Ok(triples)
}

fn action_prototype(vocab: &Vocabulary, action_id: &str) -> Result<Term, EmitError> {
    let entry = vocab
        .action(action_id)
        .ok_or_else(|| EmitError::UnknownPrototype(action_id.to_string()))?;
    Ok(Term::peo(entry.id.clone()))
}

/// Serializes the ABox in the chosen format. Deterministic for a given
/// knowledge base and options.
pub fn emit_abox(
    kb: &KnowledgeBase,
    vocab: &Vocabulary,
    ns: &Namespaces,
    options: &AboxOptions,
) -> Result<String, EmitError> {
    let triples = abox_triples(kb, vocab, ns, options.include_derived)?;
    Ok(match options.format {
        RdfFormat::Turtle => to_turtle(&triples, ns),
        RdfFormat::NTriples => to_ntriples(&triples, ns),
    })
}

/// The positive/negative examples sidecar.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamplesDoc {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

impl ExamplesDoc {
    pub fn from_kb(kb: &KnowledgeBase, ns: &Namespaces) -> ExamplesDoc {
        let mut doc = ExamplesDoc::default();
        for file in &kb.files {
            match file.label {
                1 => doc.positive.push(file.iri(ns)),
                0 => doc.negative.push(file.iri(ns)),
                _ => {}
            }
        }
        doc.positive.sort();
        doc.negative.sort();
        doc
    }
}

/// JSON document listing positive (label 1) and negative (label 0) sample
/// IRIs, each sorted; unlabeled samples are omitted.
pub fn emit_examples(kb: &KnowledgeBase, ns: &Namespaces) -> String {
    let doc = ExamplesDoc::from_kb(kb, ns);
    let mut text = serde_json::to_string_pretty(&doc).expect("examples serialize");
    text.push('\n');
    text
}

/// Expected triple count for a knowledge base: the 2 header triples, per
/// file 1 type + 7 data values + links, per section 1 type + 2 data values
/// + links.
pub fn expected_triple_count(kb: &KnowledgeBase, include_derived: bool) -> usize {
    let mut count = 2;
    for file in &kb.files {
        let features = file
            .features
            .iter()
            .filter(|f| include_derived || !f.is_derived())
            .count();
        count += 1 + 7 + features + file.actions.len() + file.sections.len();
        for section in &file.sections {
            let section_features = if include_derived {
                section.features.len()
            } else {
                0
            };
            count += 1 + 2 + section.flags.len() + section_features;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ApiActionMap;
    use crate::features::DerivationConfig;
    use crate::ingest::parse_sample;
    use crate::kb::build_kb;

    const LISTING_LINE: &str = include_str!("../../tests/data/listing1.json");

    fn listing_kb() -> (KnowledgeBase, Vocabulary, Namespaces) {
        let vocab = Vocabulary::builtin().unwrap();
        let map = ApiActionMap::builtin(&vocab);
        let sample = parse_sample(LISTING_LINE).unwrap();
        let (kb, _) = build_kb([&sample], &DerivationConfig::default(), &map);
        (kb, vocab, Namespaces::new(crate::DEFAULT_BASE_IRI))
    }

    #[test]
    fn listing_abox_contains_expected_assertions() {
        let (kb, vocab, ns) = listing_kb();
        let doc = emit_abox(&kb, &vocab, &ns, &AboxOptions::default()).unwrap();
        let sha = &kb.files[0].sha256;
        assert!(doc.contains(&format!("peo:{sha} a peo:ExecutableFile")));
        assert!(doc.contains("peo:has_file_feature peo:nonstandard_mz , peo:relocations , peo:resources , peo:tls , peo:url_strings"));
        assert!(doc.contains("peo:imports_count 17"));
        assert!(doc.contains("peo:mz_count 11"));
        assert!(doc.contains("\"6.532932639432919\"^^xsd:double"));
        assert!(doc.contains(&format!("peo:{sha}_section_0 a peo:CodeSection")));
        assert!(doc.contains("peo:section_name \"CODE\""));
        assert!(doc.contains("peo:has_section_flag peo:executable , peo:readable"));
        assert!(doc.contains("peo:has_action peo:sleep-process"));
    }

    #[test]
    fn derived_suppression_keeps_data_properties() {
        let (kb, vocab, ns) = listing_kb();
        let options = AboxOptions {
            include_derived: false,
            ..AboxOptions::default()
        };
        let doc = emit_abox(&kb, &vocab, &ns, &options).unwrap();
        // Only the direct features remain linked; NonstandardMZ and
        // URLStrings are derived and suppressed.
        assert!(doc.contains("peo:has_file_feature peo:relocations , peo:resources , peo:tls ;"));
        assert!(!doc.contains("peo:nonstandard_mz"));
        assert!(doc.contains("peo:mz_count 11"));
        assert!(doc.contains("peo:url_strings_count 9"));
    }

    #[test]
    fn empty_kb_is_header_only() {
        let vocab = Vocabulary::builtin().unwrap();
        let ns = Namespaces::new(crate::DEFAULT_BASE_IRI);
        let doc = emit_abox(&KnowledgeBase::default(), &vocab, &ns, &AboxOptions::default())
            .unwrap();
        for line in doc.lines() {
            assert!(
                line.is_empty()
                    || line.starts_with("@prefix")
                    || line.starts_with("<https://example.org/pe-malware-ontology/abox>")
                    || line.starts_with("    owl:imports"),
                "unexpected line: {line}"
            );
        }
    }

    #[test]
    fn emission_is_deterministic() {
        let (kb, vocab, ns) = listing_kb();
        let a = emit_abox(&kb, &vocab, &ns, &AboxOptions::default()).unwrap();
        let b = emit_abox(&kb, &vocab, &ns, &AboxOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn examples_doc_splits_by_label() {
        let vocab = Vocabulary::builtin().unwrap();
        let map = ApiActionMap::builtin(&vocab);
        let ns = Namespaces::new(crate::DEFAULT_BASE_IRI);
        let mal = parse_sample(&format!(r#"{{"sha256":"{}","label":1}}"#, "a".repeat(64))).unwrap();
        let ben = parse_sample(&format!(r#"{{"sha256":"{}","label":0}}"#, "b".repeat(64))).unwrap();
        let unl = parse_sample(&format!(r#"{{"sha256":"{}"}}"#, "c".repeat(64))).unwrap();
        let (kb, _) = build_kb([&mal, &ben, &unl], &DerivationConfig::default(), &map);
        let doc: ExamplesDoc = serde_json::from_str(&emit_examples(&kb, &ns)).unwrap();
        assert_eq!(doc.positive.len(), 1);
        assert_eq!(doc.negative.len(), 1);
        assert!(doc.positive[0].ends_with(&"a".repeat(64)));

        let (only_unlabeled, _) = build_kb([&unl], &DerivationConfig::default(), &map);
        let doc: ExamplesDoc =
            serde_json::from_str(&emit_examples(&only_unlabeled, &ns)).unwrap();
        assert!(doc.positive.is_empty() && doc.negative.is_empty());
    }

    #[test]
    fn triple_count_formula_matches_emission() {
        let (kb, vocab, ns) = listing_kb();
        for include_derived in [true, false] {
            let triples = abox_triples(&kb, &vocab, &ns, include_derived).unwrap();
            assert_eq!(triples.len(), expected_triple_count(&kb, include_derived));
        }
    }
}
