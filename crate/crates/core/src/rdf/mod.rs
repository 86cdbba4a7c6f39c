//! RDF triple model, deterministic Turtle / N-Triples writers, and a reader
//! for the canonical subset this crate emits.

pub mod emit;
pub mod read;
pub mod term;
pub mod write;

pub use emit::{emit_abox, emit_examples, AboxOptions, EmitError, RdfFormat};
pub use read::{load_abox, parse_turtle, ReadError};
pub use term::{Literal, LiteralKind, Namespaces, Ns, Term, Triple};
