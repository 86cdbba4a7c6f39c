//! Terms and triples with canonical lexical forms.
//!
//! Literals store their lexical text rather than native numerics so that
//! ordering, equality and emission are all byte-stable. The double formatter
//! produces the shortest decimal that round-trips through IEEE 754, which
//! keeps values like 6.532932639432919 intact across emit/parse cycles.

use std::fmt;

pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

/// Namespace selector for prefixed names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ns {
    Owl,
    Peo,
    Rdf,
    Rdfs,
    Xsd,
}

impl Ns {
    pub fn prefix(self) -> &'static str {
        match self {
            Ns::Owl => "owl",
            Ns::Peo => "peo",
            Ns::Rdf => "rdf",
            Ns::Rdfs => "rdfs",
            Ns::Xsd => "xsd",
        }
    }
}

/// Prefix-to-IRI bindings used when rendering or expanding terms. Only the
/// `peo:` namespace is configurable; the W3C namespaces are fixed.
#[derive(Debug, Clone)]
pub struct Namespaces {
    pub peo: String,
}

impl Namespaces {
    /// Normalizes a base IRI so it ends with a `#` or `/` separator.
    pub fn new(base_iri: &str) -> Self {
        let peo = if base_iri.ends_with('#') || base_iri.ends_with('/') {
            base_iri.to_string()
        } else {
            format!("{base_iri}#")
        };
        Namespaces { peo }
    }

    /// The ontology's own IRI: the namespace without its trailing separator.
    pub fn ontology_iri(&self) -> &str {
        self.peo.trim_end_matches(['#', '/'])
    }

    pub fn expand(&self, ns: Ns) -> &str {
        match ns {
            Ns::Owl => OWL_NS,
            Ns::Peo => &self.peo,
            Ns::Rdf => RDF_NS,
            Ns::Rdfs => RDFS_NS,
            Ns::Xsd => XSD_NS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LiteralKind {
    Integer,
    Double,
    Str,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literal {
    pub lexical: String,
    pub kind: LiteralKind,
}

impl Literal {
    pub fn integer(value: u64) -> Self {
        Literal {
            lexical: value.to_string(),
            kind: LiteralKind::Integer,
        }
    }

    pub fn double(value: f64) -> Self {
        Literal {
            lexical: format_double(value),
            kind: LiteralKind::Double,
        }
    }

    pub fn string(value: &str) -> Self {
        Literal {
            lexical: value.to_string(),
            kind: LiteralKind::Str,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    /// A name under one of the known namespaces, e.g. `peo:TLS`.
    Prefixed(Ns, String),
    /// An absolute IRI rendered in angle brackets.
    Full(String),
    Literal(Literal),
}

impl Term {
    pub fn peo(local: impl Into<String>) -> Self {
        Term::Prefixed(Ns::Peo, local.into())
    }

    pub fn rdf_type() -> Self {
        Term::Prefixed(Ns::Rdf, "type".into())
    }

    pub fn owl(local: &str) -> Self {
        Term::Prefixed(Ns::Owl, local.into())
    }

    pub fn rdfs(local: &str) -> Self {
        Term::Prefixed(Ns::Rdfs, local.into())
    }

    pub fn xsd(local: &str) -> Self {
        Term::Prefixed(Ns::Xsd, local.into())
    }

    pub fn is_rdf_type(&self) -> bool {
        matches!(self, Term::Prefixed(Ns::Rdf, local) if local == "type")
    }

    /// Absolute IRI of an IRI term; literals have none.
    pub fn iri(&self, ns: &Namespaces) -> Option<String> {
        match self {
            Term::Prefixed(p, local) => Some(format!("{}{}", ns.expand(*p), local)),
            Term::Full(iri) => Some(iri.clone()),
            Term::Literal(_) => None,
        }
    }

    /// Turtle rendering with prefixed names.
    pub fn turtle(&self) -> String {
        match self {
            Term::Prefixed(ns, local) => format!("{}:{}", ns.prefix(), local),
            Term::Full(iri) => format!("<{iri}>"),
            Term::Literal(lit) => match lit.kind {
                LiteralKind::Integer => lit.lexical.clone(),
                LiteralKind::Double => format!("\"{}\"^^xsd:double", escape_string(&lit.lexical)),
                LiteralKind::Str => format!("\"{}\"", escape_string(&lit.lexical)),
            },
        }
    }

    /// N-Triples rendering with absolute IRIs.
    pub fn ntriples(&self, ns: &Namespaces) -> String {
        match self {
            Term::Prefixed(..) | Term::Full(_) => {
                format!("<{}>", self.iri(ns).expect("iri term"))
            }
            Term::Literal(lit) => match lit.kind {
                LiteralKind::Integer => {
                    format!("\"{}\"^^<{XSD_NS}integer>", escape_string(&lit.lexical))
                }
                LiteralKind::Double => {
                    format!("\"{}\"^^<{XSD_NS}double>", escape_string(&lit.lexical))
                }
                LiteralKind::Str => format!("\"{}\"", escape_string(&lit.lexical)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }
}

/// Escapes a string for Turtle / N-Triples double-quoted literals.
pub fn escape_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04X}", c as u32));
            }
            c => out.push(c),
        }
    }
    out
}

/// Shortest decimal text that parses back to exactly `value`. A `.0` is
/// appended when the shortest form has no fractional part or exponent, so
/// the text stays in xsd:double's lexical space unambiguously.
pub fn format_double(value: f64) -> String {
    let mut s = format!("{value}");
    if !s.contains(['.', 'e', 'E']) {
        s.push_str(".0");
    }
    s
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.turtle())
    }
}
