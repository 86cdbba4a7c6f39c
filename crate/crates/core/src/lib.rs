//! Toolkit for turning EMBER-style PE static-analysis records into an OWL 2
//! knowledge graph aligned with the PE Malware Ontology, plus a closed-world
//! class-expression query engine and reproducible dataset sampling.
//!
//! The pipeline is: [`ingest`] parses JSON-Lines records into [`ingest::RawSample`],
//! [`features`] derives file/section classifications and features, [`actions`]
//! maps imported API functions onto malware actions, [`kb`] assembles ABox
//! individuals, and [`rdf`] serializes them deterministically. [`query`]
//! evaluates Manchester-style class expressions against the assembled
//! knowledge base, and [`fraction`]/[`stats`] cover dataset sampling and
//! threshold analysis.

pub mod actions;
pub mod features;
pub mod fraction;
pub mod ingest;
pub mod kb;
pub mod query;
pub mod rdf;
pub mod report;
pub mod rng;
pub mod stats;
pub mod vocab;

pub use features::DerivationConfig;
pub use kb::KnowledgeBase;
pub use vocab::Vocabulary;

/// Default base IRI for emitted individuals and the vocabulary itself.
/// Overridable with `--base-iri` or the `PEO_BASE_IRI` environment variable.
pub const DEFAULT_BASE_IRI: &str = "https://example.org/pe-malware-ontology#";
