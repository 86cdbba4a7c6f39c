//! Byte-deterministic document writers.
//!
//! Turtle output groups triples into subject blocks. Subjects are ordered by
//! their rendered form, predicates within a block put `rdf:type` first and
//! the rest in lexicographic order, objects per predicate are sorted. The
//! N-Triples writer emits one sorted line per triple. Two emissions of the
//! same triple set are byte-identical.

use std::collections::BTreeMap;

use super::term::{Namespaces, Term, Triple};

/// Sort key placing `rdf:type` ahead of all other predicates.
fn predicate_key(p: &Term) -> (u8, String) {
    if p.is_rdf_type() {
        (0, String::new())
    } else {
        (1, p.turtle())
    }
}

fn prefix_block(ns: &Namespaces) -> String {
    let mut out = String::new();
    for (prefix, iri) in [
        ("owl", super::term::OWL_NS),
        ("peo", ns.peo.as_str()),
        ("rdf", super::term::RDF_NS),
        ("rdfs", super::term::RDFS_NS),
        ("xsd", super::term::XSD_NS),
    ] {
        out.push_str(&format!("@prefix {prefix}: <{iri}> .\n"));
    }
    out
}

/// Renders a Turtle document: prefix declarations, then subject blocks.
pub fn to_turtle(triples: &[Triple], ns: &Namespaces) -> String {
    let mut grouped: BTreeMap<String, BTreeMap<(u8, String), Vec<String>>> = BTreeMap::new();
    for t in triples {
        let pred = if t.predicate.is_rdf_type() {
            "a".to_string()
        } else {
            t.predicate.turtle()
        };
        grouped
            .entry(t.subject.turtle())
            .or_default()
            .entry((predicate_key(&t.predicate).0, pred))
            .or_default()
            .push(t.object.turtle());
    }

    let mut out = prefix_block(ns);
    for (subject, predicates) in grouped {
        out.push('\n');
        out.push_str(&subject);
        let mut first_pred = true;
        for ((_, pred), mut objects) in predicates {
            objects.sort();
            objects.dedup();
            if first_pred {
                out.push(' ');
                first_pred = false;
            } else {
                out.push_str(" ;\n    ");
            }
            out.push_str(&pred);
            out.push(' ');
            out.push_str(&objects.join(" , "));
        }
        out.push_str(" .\n");
    }
    out
}

/// Renders an N-Triples document with lexicographically sorted lines.
pub fn to_ntriples(triples: &[Triple], ns: &Namespaces) -> String {
    let mut lines: Vec<String> = triples
        .iter()
        .map(|t| {
            format!(
                "{} {} {} .",
                t.subject.ntriples(ns),
                t.predicate.ntriples(ns),
                t.object.ntriples(ns)
            )
        })
        .collect();
    lines.sort();
    lines.dedup();
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}
