//! Class-expression parsing, closed-world evaluation and scoring.
//!
//! The supported fragment is the Manchester-style subset appearing in the
//! ontology's derived-feature annotations and in concept-learning output:
//! conjunction, disjunction, negation, existential restrictions with class
//! or nominal fillers, min-cardinality, numeric datatype facets and negated
//! string enumerations.
//!
//! Evaluation is deliberately closed-world over the knowledge base's
//! explicit assertions plus subclass closure: negation is complement within
//! the set of file, section and prototype individuals, and cardinalities
//! count asserted links only. This matches retrieval over a fully-known
//! ABox; it is not OWL's open-world entailment.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::kb::KnowledgeBase;
use crate::rdf::term::Namespaces;
use crate::vocab::{DataRange, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facet {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NumericValue {
    Integer(i64),
    Double(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectFiller {
    Expression(Box<ClassExpression>),
    /// `{name, ...}` — an enumeration of prototypical individuals.
    Nominals(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassExpression {
    Class(String),
    Not(Box<ClassExpression>),
    And(Vec<ClassExpression>),
    Or(Vec<ClassExpression>),
    ObjectSome(String, ObjectFiller),
    ObjectMin(u32, String, ObjectFiller),
    DataSome(String, Facet, NumericValue),
    /// `prop some not { "s", ... }`
    DataNotIn(String, Vec<String>),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown name `{0}`")]
    UnknownName(String),
    #[error("property `{property}` is not a `{expected}` property")]
    PropertyKind {
        property: String,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(String),
    Str(String),
    Punct(char),
    Op(Facet),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let mut tokens = Vec::new();
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let position = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
            }
            '(' | ')' | '{' | '}' | '[' | ']' | ',' => {
                tokens.push((position, Token::Punct(c)));
                i += 1;
            }
            '<' | '>' => {
                if bytes.get(i + 1) == Some(&'=') {
                    tokens.push((
                        position,
                        Token::Op(if c == '<' { Facet::Le } else { Facet::Ge }),
                    ));
                    i += 2;
                } else {
                    tokens.push((
                        position,
                        Token::Op(if c == '<' { Facet::Lt } else { Facet::Gt }),
                    ));
                    i += 1;
                }
            }
            '≤' => {
                tokens.push((position, Token::Op(Facet::Le)));
                i += 1;
            }
            '≥' => {
                tokens.push((position, Token::Op(Facet::Ge)));
                i += 1;
            }
            '=' => {
                tokens.push((position, Token::Op(Facet::Eq)));
                i += 1;
            }
            '"' => {
                i += 1;
                let mut value = String::new();
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(ExprError::Syntax {
                                position,
                                message: "unterminated string".into(),
                            })
                        }
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => {
                            let escaped = bytes.get(i + 1).ok_or(ExprError::Syntax {
                                position,
                                message: "truncated escape".into(),
                            })?;
                            value.push(match escaped {
                                'n' => '\n',
                                'r' => '\r',
                                't' => '\t',
                                other => *other,
                            });
                            i += 2;
                        }
                        Some(other) => {
                            value.push(*other);
                            i += 1;
                        }
                    }
                }
                tokens.push((position, Token::Str(value)));
            }
            c if c.is_ascii_digit() => {
                let mut value = String::new();
                while let Some(&d) = bytes.get(i) {
                    if d.is_ascii_digit() || d == '.' {
                        value.push(d);
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push((position, Token::Number(value)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut value = String::new();
                while let Some(&d) = bytes.get(i) {
                    if d.is_alphanumeric() || matches!(d, '_' | '-' | ':') {
                        value.push(d);
                        i += 1;
                    } else {
                        break;
                    }
                }
                tokens.push((position, Token::Ident(value)));
            }
            other => {
                return Err(ExprError::Syntax {
                    position,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    vocab: &'a Vocabulary,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn advance(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        if token.is_some() {
            self.cursor += 1;
        }
        token
    }

    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            position: self.position(),
            message: message.into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ExprError> {
        match self.advance() {
            Some(Token::Punct(p)) if p == c => Ok(()),
            other => Err(self.error(format!("expected `{c}`, got {other:?}"))),
        }
    }

    fn is_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Token::Ident(w)) if w == word)
    }

    fn eat_keyword(&mut self, word: &str) -> bool {
        if self.is_keyword(word) {
            self.cursor += 1;
            true
        } else {
            false
        }
    }

    fn parse_expression(&mut self) -> Result<ClassExpression, ExprError> {
        let first = self.parse_and()?;
        let mut operands = vec![first];
        while self.eat_keyword("or") {
            operands.push(self.parse_and()?);
        }
        Ok(if operands.len() == 1 {
            operands.pop().unwrap()
        } else {
            ClassExpression::Or(operands)
        })
    }

    fn parse_and(&mut self) -> Result<ClassExpression, ExprError> {
        let first = self.parse_unary()?;
        let mut operands = vec![first];
        while self.eat_keyword("and") {
            operands.push(self.parse_unary()?);
        }
        Ok(if operands.len() == 1 {
            operands.pop().unwrap()
        } else {
            ClassExpression::And(operands)
        })
    }

    fn parse_unary(&mut self) -> Result<ClassExpression, ExprError> {
        if self.eat_keyword("not") {
            return Ok(ClassExpression::Not(Box::new(self.parse_unary()?)));
        }
        if matches!(self.peek(), Some(Token::Punct('('))) {
            self.cursor += 1;
            let inner = self.parse_expression()?;
            self.expect_punct(')')?;
            return Ok(inner);
        }
        let name = match self.advance() {
            Some(Token::Ident(name)) => name,
            other => return Err(self.error(format!("expected a name, got {other:?}"))),
        };
        if let Some(property) = self.vocab.object_property(&name) {
            let property = property.name.clone();
            return if self.eat_keyword("some") {
                Ok(ClassExpression::ObjectSome(
                    property,
                    self.parse_object_filler()?,
                ))
            } else if self.eat_keyword("min") {
                let n = match self.advance() {
                    Some(Token::Number(n)) => n
                        .parse::<u32>()
                        .map_err(|_| self.error(format!("bad cardinality {n}")))?,
                    other => return Err(self.error(format!("expected cardinality, got {other:?}"))),
                };
                if n == 0 {
                    return Err(self.error("min cardinality must be at least 1"));
                }
                Ok(ClassExpression::ObjectMin(
                    n,
                    property,
                    self.parse_object_filler()?,
                ))
            } else {
                Err(self.error(format!("property `{property}` needs `some` or `min`")))
            };
        }
        if let Some(property) = self.vocab.data_property(&name) {
            let range = property.range;
            let property = property.name.clone();
            if !self.eat_keyword("some") {
                return Err(self.error(format!("property `{property}` needs `some`")));
            }
            return self.parse_data_filler(property, range);
        }
        match self.vocab.class(&name) {
            Some(_) => Ok(ClassExpression::Class(name)),
            None => Err(ExprError::UnknownName(name)),
        }
    }

    fn parse_object_filler(&mut self) -> Result<ObjectFiller, ExprError> {
        if matches!(self.peek(), Some(Token::Punct('{'))) {
            self.cursor += 1;
            let mut names = Vec::new();
            loop {
                match self.advance() {
                    Some(Token::Ident(name)) => {
                        if self.vocab.class_of_prototype(&name).is_none() {
                            return Err(ExprError::UnknownName(name));
                        }
                        names.push(name);
                    }
                    other => return Err(self.error(format!("expected individual, got {other:?}"))),
                }
                match self.advance() {
                    Some(Token::Punct(',')) => continue,
                    Some(Token::Punct('}')) => break,
                    other => return Err(self.error(format!("expected , or }}, got {other:?}"))),
                }
            }
            return Ok(ObjectFiller::Nominals(names));
        }
        Ok(ObjectFiller::Expression(Box::new(self.parse_unary()?)))
    }

    fn parse_data_filler(
        &mut self,
        property: String,
        range: DataRange,
    ) -> Result<ClassExpression, ExprError> {
        if self.eat_keyword("not") {
            if range != DataRange::Str {
                return Err(ExprError::PropertyKind {
                    property,
                    expected: "string",
                });
            }
            self.expect_punct('{')?;
            let mut values = Vec::new();
            loop {
                match self.advance() {
                    Some(Token::Str(value)) => values.push(value),
                    other => {
                        return Err(self.error(format!("expected string literal, got {other:?}")))
                    }
                }
                match self.advance() {
                    Some(Token::Punct(',')) => continue,
                    Some(Token::Punct('}')) => break,
                    other => return Err(self.error(format!("expected , or }}, got {other:?}"))),
                }
            }
            return Ok(ClassExpression::DataNotIn(property, values));
        }

        let datatype = match self.advance() {
            Some(Token::Ident(dt)) => dt,
            other => return Err(self.error(format!("expected datatype, got {other:?}"))),
        };
        let expected = match (datatype.as_str(), range) {
            ("xsd:integer", DataRange::Integer) => DataRange::Integer,
            ("xsd:double", DataRange::Double) => DataRange::Double,
            ("xsd:integer" | "xsd:double", _) => {
                return Err(ExprError::PropertyKind {
                    property,
                    expected: range.xsd_local(),
                })
            }
            _ => return Err(self.error(format!("unsupported datatype `{datatype}`"))),
        };
        self.expect_punct('[')?;
        let facet = match self.advance() {
            Some(Token::Op(op)) => op,
            other => return Err(self.error(format!("expected facet operator, got {other:?}"))),
        };
        let value = match self.advance() {
            Some(Token::Number(text)) => match expected {
                DataRange::Integer => NumericValue::Integer(
                    text.parse()
                        .map_err(|_| self.error(format!("bad integer {text}")))?,
                ),
                _ => NumericValue::Double(
                    text.parse()
                        .map_err(|_| self.error(format!("bad number {text}")))?,
                ),
            },
            other => return Err(self.error(format!("expected numeric value, got {other:?}"))),
        };
        self.expect_punct(']')?;
        Ok(ClassExpression::DataSome(property, facet, value))
    }
}

/// Parses and validates an expression against the vocabulary.
pub fn parse_expression(text: &str, vocab: &Vocabulary) -> Result<ClassExpression, ExprError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        vocab,
        end: text.chars().count(),
    };
    let expr = parser.parse_expression()?;
    if parser.cursor != parser.tokens.len() {
        return Err(parser.error("trailing input after expression"));
    }
    Ok(expr)
}

/// Evaluation index over a knowledge base: files, sections and the
/// vocabulary's prototypical individuals, with subclass closure and
/// property edges precomputed. Read-only and shareable.
pub struct KbIndex<'a> {
    vocab: &'a Vocabulary,
    iris: Vec<String>,
    /// asserted class name -> members
    asserted: BTreeMap<String, BTreeSet<u32>>,
    /// object property -> sorted (subject, object) pairs
    edges: BTreeMap<&'static str, Vec<(u32, u32)>>,
    int_values: BTreeMap<&'static str, Vec<(u32, u64)>>,
    entropy_values: Vec<(u32, f64)>,
    name_values: Vec<(u32, String)>,
    prototype_ids: BTreeMap<String, u32>,
    file_ids: BTreeSet<u32>,
    section_ids: BTreeSet<u32>,
    universe: BTreeSet<u32>,
    /// file id -> label, for scoring
    labels: BTreeMap<u32, i8>,
}

impl<'a> KbIndex<'a> {
    pub fn new(kb: &'a KnowledgeBase, vocab: &'a Vocabulary, ns: &Namespaces) -> KbIndex<'a> {
        let mut index = KbIndex {
            vocab,
            iris: Vec::new(),
            asserted: BTreeMap::new(),
            edges: BTreeMap::new(),
            int_values: BTreeMap::new(),
            entropy_values: Vec::new(),
            name_values: Vec::new(),
            prototype_ids: BTreeMap::new(),
            file_ids: BTreeSet::new(),
            section_ids: BTreeSet::new(),
            universe: BTreeSet::new(),
            labels: BTreeMap::new(),
        };

        for (class, proto) in vocab.prototypes() {
            let id = index.intern(format!("{}{}", ns.peo, proto));
            index.prototype_ids.insert(proto.to_string(), id);
            index.assert_class(class.to_string(), id);
        }

        for file in &kb.files {
            let file_id = index.intern(file.iri(ns));
            index.file_ids.insert(file_id);
            index.labels.insert(file_id, file.label);
            index.assert_class(file.file_class.class_name().to_string(), file_id);
            for (property, value) in file.data.entries() {
                index
                    .int_values
                    .entry(property)
                    .or_default()
                    .push((file_id, value));
            }
            for feature in &file.features {
                let proto = vocab
                    .prototype_of(feature.class_name())
                    .expect("feature prototype");
                let target = index.prototype_ids[proto];
                index.add_edge("has_file_feature", file_id, target);
            }
            for action in &file.actions {
                let target = index.prototype_ids[action.as_str()];
                index.add_edge("has_action", file_id, target);
            }
            for section in &file.sections {
                let section_id = index.intern(file.section_iri(ns, section.index));
                index.section_ids.insert(section_id);
                index.add_edge("has_section", file_id, section_id);
                index.assert_class(section.section_class.class_name().to_string(), section_id);
                index.entropy_values.push((section_id, section.section_entropy));
                index
                    .name_values
                    .push((section_id, section.section_name.clone()));
                for flag in &section.flags {
                    let proto = vocab.prototype_of(flag.class_name()).expect("flag prototype");
                    let target = index.prototype_ids[proto];
                    index.add_edge("has_section_flag", section_id, target);
                }
                for feature in &section.features {
                    let proto = vocab
                        .prototype_of(feature.class_name())
                        .expect("section feature prototype");
                    let target = index.prototype_ids[proto];
                    index.add_edge("has_section_feature", section_id, target);
                }
            }
        }
        index.universe = (0..index.iris.len() as u32).collect();
        index
    }

    fn intern(&mut self, iri: String) -> u32 {
        let id = self.iris.len() as u32;
        self.iris.push(iri);
        id
    }

    fn assert_class(&mut self, class: String, id: u32) {
        self.asserted.entry(class).or_default().insert(id);
    }

    fn add_edge(&mut self, property: &'static str, from: u32, to: u32) {
        self.edges.entry(property).or_default().push((from, to));
    }

    pub fn iri(&self, id: u32) -> &str {
        &self.iris[id as usize]
    }

    fn to_iris(&self, ids: &BTreeSet<u32>) -> BTreeSet<String> {
        ids.iter().map(|&id| self.iris[id as usize].clone()).collect()
    }

    fn eval_ids(&self, expr: &ClassExpression) -> BTreeSet<u32> {
        match expr {
            ClassExpression::Class(name) => {
                let mut out = BTreeSet::new();
                for class in self.vocab.descendants(name) {
                    if let Some(members) = self.asserted.get(class) {
                        out.extend(members.iter().copied());
                    }
                }
                out
            }
            ClassExpression::Not(inner) => {
                let inner = self.eval_ids(inner);
                self.universe.difference(&inner).copied().collect()
            }
            ClassExpression::And(operands) => {
                let mut sets = operands.iter().map(|e| self.eval_ids(e));
                let first = sets.next().unwrap_or_default();
                sets.fold(first, |acc, s| acc.intersection(&s).copied().collect())
            }
            ClassExpression::Or(operands) => {
                let mut out = BTreeSet::new();
                for operand in operands {
                    out.extend(self.eval_ids(operand));
                }
                out
            }
            ClassExpression::ObjectSome(property, filler) => {
                let targets = self.filler_ids(filler);
                self.subjects_with_matches(property, &targets, 1)
            }
            ClassExpression::ObjectMin(n, property, filler) => {
                let targets = self.filler_ids(filler);
                self.subjects_with_matches(property, &targets, *n as usize)
            }
            ClassExpression::DataSome(property, facet, value) => {
                self.eval_data_facet(property, *facet, value)
            }
            ClassExpression::DataNotIn(_, excluded) => self
                .name_values
                .iter()
                .filter(|(_, name)| !excluded.iter().any(|e| e == name))
                .map(|(id, _)| *id)
                .collect(),
        }
    }

    fn filler_ids(&self, filler: &ObjectFiller) -> BTreeSet<u32> {
        match filler {
            ObjectFiller::Expression(expr) => self.eval_ids(expr),
            ObjectFiller::Nominals(names) => names
                .iter()
                .filter_map(|name| self.prototype_ids.get(name).copied())
                .collect(),
        }
    }

    fn subjects_with_matches(
        &self,
        property: &str,
        targets: &BTreeSet<u32>,
        min: usize,
    ) -> BTreeSet<u32> {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        if let Some(edges) = self.edges.get(property) {
            for (subject, object) in edges {
                if targets.contains(object) {
                    *counts.entry(*subject).or_default() += 1;
                }
            }
        }
        counts
            .into_iter()
            .filter(|(_, count)| *count >= min)
            .map(|(subject, _)| subject)
            .collect()
    }

    fn eval_data_facet(
        &self,
        property: &str,
        facet: Facet,
        value: &NumericValue,
    ) -> BTreeSet<u32> {
        match value {
            NumericValue::Integer(rhs) => {
                let rhs = *rhs as i128;
                self.int_values
                    .get(property)
                    .into_iter()
                    .flatten()
                    .filter(|(_, v)| compare(*v as i128, rhs, facet))
                    .map(|(id, _)| *id)
                    .collect()
            }
            NumericValue::Double(rhs) => {
                if property == "section_entropy" {
                    self.entropy_values
                        .iter()
                        .filter(|(_, v)| compare_f64(*v, *rhs, facet))
                        .map(|(id, _)| *id)
                        .collect()
                } else {
                    BTreeSet::new()
                }
            }
        }
    }

    /// Evaluates over the full universe (files, sections and prototypes).
    pub fn evaluate(&self, expr: &ClassExpression) -> BTreeSet<String> {
        self.to_iris(&self.eval_ids(expr))
    }

    /// Evaluation restricted to PE file individuals; this is how top-level
    /// query results are reported.
    pub fn evaluate_files(&self, expr: &ClassExpression) -> BTreeSet<String> {
        let ids = self.eval_ids(expr);
        self.to_iris(&ids.intersection(&self.file_ids).copied().collect())
    }

    /// Evaluation restricted to section individuals.
    pub fn evaluate_sections(&self, expr: &ClassExpression) -> BTreeSet<String> {
        let ids = self.eval_ids(expr);
        self.to_iris(&ids.intersection(&self.section_ids).copied().collect())
    }

    /// Confusion counts of `expr` against the labeled files.
    pub fn score(&self, expr: &ClassExpression) -> Result<ConceptScore, ScoreError> {
        let labeled: Vec<(u32, i8)> = self
            .labels
            .iter()
            .filter(|(_, label)| **label >= 0)
            .map(|(id, label)| (*id, *label))
            .collect();
        if labeled.is_empty() {
            return Err(ScoreError::NoLabeledData);
        }
        let matches = self.eval_ids(expr);
        let mut score = ConceptScore::default();
        for (id, label) in labeled {
            match (matches.contains(&id), label) {
                (true, 1) => score.tp += 1,
                (true, 0) => score.fp += 1,
                (false, 1) => score.fn_ += 1,
                (false, 0) => score.tn += 1,
                _ => {}
            }
        }
        score.finish();
        Ok(score)
    }
}

fn compare(lhs: i128, rhs: i128, facet: Facet) -> bool {
    match facet {
        Facet::Lt => lhs < rhs,
        Facet::Le => lhs <= rhs,
        Facet::Gt => lhs > rhs,
        Facet::Ge => lhs >= rhs,
        Facet::Eq => lhs == rhs,
    }
}

fn compare_f64(lhs: f64, rhs: f64, facet: Facet) -> bool {
    match facet {
        Facet::Lt => lhs < rhs,
        Facet::Le => lhs <= rhs,
        Facet::Gt => lhs > rhs,
        Facet::Ge => lhs >= rhs,
        Facet::Eq => lhs == rhs,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("knowledge base has no labeled files")]
    NoLabeledData,
}

/// Confusion counts and derived metrics over labeled files. Metrics whose
/// denominator is zero are reported as 0 and listed in `undefined`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConceptScore {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<&'static str>,
}

/// Result document for a top-level query: sorted PE file IRIs plus an
/// optional score.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QueryResult {
    pub matches: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<ConceptScore>,
}

impl QueryResult {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("query result serializes");
        text.push('\n');
        text
    }
}

impl ConceptScore {
    fn finish(&mut self) {
        let total = self.tp + self.fp + self.tn + self.fn_;
        let mut ratio = |num: u64, den: u64, name: &'static str| -> f64 {
            if den == 0 {
                self.undefined.push(name);
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        self.accuracy = ratio(self.tp + self.tn, total, "accuracy");
        self.precision = ratio(self.tp, self.tp + self.fp, "precision");
        self.recall = ratio(self.tp, self.tp + self.fn_, "recall");
        self.f1 = if self.precision + self.recall == 0.0 {
            self.undefined.push("f1");
            0.0
        } else {
            2.0 * self.precision * self.recall / (self.precision + self.recall)
        };
    }
}
