//! Reader for the canonical Turtle / N-Triples subset emitted by this crate,
//! and reconstruction of a [`KnowledgeBase`] from an ABox document.
//!
//! This is not a general-purpose Turtle parser; it covers prefix
//! declarations, subject blocks with `;`/`,` continuation, IRIs, prefixed
//! names, numeric shorthand and typed or plain string literals, which is
//! exactly the grammar the writers produce.

use std::collections::BTreeMap;

use thiserror::Error;

use super::term::{RDF_NS, XSD_NS};
use crate::features::{FileClass, FileFeature, SectionClass, SectionFeature, SectionFlag};
use crate::kb::{FileDataValues, KnowledgeBase, PEFileIndividual, SectionIndividual};
use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("document does not describe an ABox (missing ontology header or peo prefix)")]
    MissingNamespace,
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown prototype or action `{0}`")]
    UnknownPrototype(String),
    #[error("individual `{subject}`: {message}")]
    BadIndividual { subject: String, message: String },
}

/// An absolute-IRI triple as read back from a document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ReadTriple {
    pub subject: String,
    pub predicate: String,
    pub object: ReadTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReadTerm {
    Iri(String),
    Literal { lexical: String, datatype: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Iri(String),
    Prefixed(String, String),
    Keyword(char),
    PrefixDecl,
    StringLit(String),
    Integer(String),
    DatatypeMarker,
    A,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
        }
    }

    fn error(&self, message: impl Into<String>) -> ReadError {
        ReadError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == '\n' {
                self.line += 1;
                self.chars.next();
            } else if c.is_whitespace() {
                self.chars.next();
            } else if c == '#' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.chars.next();
                }
            } else {
                break;
            }
        }
    }

    fn read_string(&mut self) -> Result<String, ReadError> {
        let mut out = String::new();
        loop {
            match self.chars.next() {
                None => return Err(self.error("unterminated string literal")),
                Some('"') => return Ok(out),
                Some('\\') => match self.chars.next() {
                    Some('\\') => out.push('\\'),
                    Some('"') => out.push('"'),
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some('u') => out.push(self.read_unicode_escape(4)?),
                    Some('U') => out.push(self.read_unicode_escape(8)?),
                    other => return Err(self.error(format!("bad escape {other:?}"))),
                },
                Some(c) => {
                    if c == '\n' {
                        self.line += 1;
                    }
                    out.push(c);
                }
            }
        }
    }

    fn read_unicode_escape(&mut self, digits: usize) -> Result<char, ReadError> {
        let mut value = 0u32;
        for _ in 0..digits {
            let c = self
                .chars
                .next()
                .ok_or_else(|| self.error("truncated unicode escape"))?;
            value = value * 16
                + c.to_digit(16)
                    .ok_or_else(|| self.error("bad unicode escape digit"))?;
        }
        char::from_u32(value).ok_or_else(|| self.error("invalid unicode escape"))
    }

    fn next_token(&mut self) -> Result<Option<Token>, ReadError> {
        self.skip_ws();
        let Some(&c) = self.chars.peek() else {
            return Ok(None);
        };
        match c {
            '<' => {
                self.chars.next();
                let mut iri = String::new();
                loop {
                    match self.chars.next() {
                        None => return Err(self.error("unterminated IRI")),
                        Some('>') => break,
                        Some(c) => iri.push(c),
                    }
                }
                Ok(Some(Token::Iri(iri)))
            }
            '"' => {
                self.chars.next();
                Ok(Some(Token::StringLit(self.read_string()?)))
            }
            '.' | ';' | ',' => {
                self.chars.next();
                Ok(Some(Token::Keyword(c)))
            }
            '^' => {
                self.chars.next();
                if self.chars.next() != Some('^') {
                    return Err(self.error("expected ^^"));
                }
                Ok(Some(Token::DatatypeMarker))
            }
            '@' => {
                self.chars.next();
                let word: String = std::iter::from_fn(|| {
                    self.chars
                        .next_if(|c| c.is_ascii_alphabetic())
                })
                .collect();
                if word == "prefix" {
                    Ok(Some(Token::PrefixDecl))
                } else {
                    Err(self.error(format!("unsupported directive @{word}")))
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '+' => {
                let number: String = std::iter::from_fn(|| {
                    self.chars
                        .next_if(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E'))
                })
                .collect();
                Ok(Some(Token::Integer(number)))
            }
            _ => {
                // Prefixed name or the keyword `a`.
                let mut word = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || matches!(c, ';' | ',' | '<' | '"' | '^') {
                        break;
                    }
                    // A dot terminates a statement unless it is inside a
                    // local name (our locals never end with a dot).
                    if c == '.' {
                        let mut ahead = self.chars.clone();
                        ahead.next();
                        match ahead.peek() {
                            None => break,
                            Some(&n) if n.is_whitespace() || n == '#' => break,
                            _ => {}
                        }
                    }
                    word.push(c);
                    self.chars.next();
                }
                if word.is_empty() {
                    return Err(self.error(format!("unexpected character {c:?}")));
                }
                if word == "a" {
                    return Ok(Some(Token::A));
                }
                match word.split_once(':') {
                    Some((prefix, local)) => {
                        Ok(Some(Token::Prefixed(prefix.to_string(), local.to_string())))
                    }
                    None => Err(self.error(format!("bare word `{word}`"))),
                }
            }
        }
    }
}

/// Parses a document into absolute triples plus the prefix table.
pub fn parse_turtle(
    text: &str,
) -> Result<(Vec<ReadTriple>, BTreeMap<String, String>), ReadError> {
    let mut lexer = Lexer::new(text);
    let mut prefixes: BTreeMap<String, String> = BTreeMap::new();
    let mut triples = Vec::new();

    while let Some(token) = lexer.next_token()? {
        if token == Token::PrefixDecl {
            let name = match lexer.next_token()? {
                Some(Token::Prefixed(prefix, local)) if local.is_empty() => prefix,
                other => return Err(lexer.error(format!("expected prefix name, got {other:?}"))),
            };
            let iri = match lexer.next_token()? {
                Some(Token::Iri(iri)) => iri,
                other => return Err(lexer.error(format!("expected IRI, got {other:?}"))),
            };
            match lexer.next_token()? {
                Some(Token::Keyword('.')) => {}
                other => return Err(lexer.error(format!("expected `.`, got {other:?}"))),
            }
            prefixes.insert(name, iri);
            continue;
        }

        let subject = expand_iri(&token, &prefixes, &lexer)?;
        'verbs: loop {
            let verb_token = lexer
                .next_token()?
                .ok_or_else(|| lexer.error("unexpected end of statement"))?;
            let predicate = if verb_token == Token::A {
                format!("{RDF_NS}type")
            } else {
                expand_iri(&verb_token, &prefixes, &lexer)?
            };
            loop {
                let object_token = lexer
                    .next_token()?
                    .ok_or_else(|| lexer.error("unexpected end of object list"))?;
                let object = read_object(object_token, &mut lexer, &prefixes)?;
                triples.push(ReadTriple {
                    subject: subject.clone(),
                    predicate: predicate.clone(),
                    object,
                });
                match lexer.next_token()? {
                    Some(Token::Keyword(',')) => continue,
                    Some(Token::Keyword(';')) => continue 'verbs,
                    Some(Token::Keyword('.')) => break 'verbs,
                    other => return Err(lexer.error(format!("expected , ; or ., got {other:?}"))),
                }
            }
        }
    }
    Ok((triples, prefixes))
}

fn expand_iri(
    token: &Token,
    prefixes: &BTreeMap<String, String>,
    lexer: &Lexer<'_>,
) -> Result<String, ReadError> {
    match token {
        Token::Iri(iri) => Ok(iri.clone()),
        Token::Prefixed(prefix, local) => prefixes
            .get(prefix)
            .map(|ns| format!("{ns}{local}"))
            .ok_or_else(|| lexer.error(format!("undeclared prefix `{prefix}`"))),
        other => Err(lexer.error(format!("expected IRI, got {other:?}"))),
    }
}

fn read_object(
    token: Token,
    lexer: &mut Lexer<'_>,
    prefixes: &BTreeMap<String, String>,
) -> Result<ReadTerm, ReadError> {
    match token {
        Token::Iri(_) | Token::Prefixed(..) => {
            Ok(ReadTerm::Iri(expand_iri(&token, prefixes, lexer)?))
        }
        Token::Integer(lexical) => Ok(ReadTerm::Literal {
            lexical,
            datatype: format!("{XSD_NS}integer"),
        }),
        Token::StringLit(lexical) => {
            // Peek for ^^datatype; plain strings are xsd:string.
            let mut probe = lexer.chars.clone();
            while probe.peek().is_some_and(|c| *c == ' ') {
                probe.next();
            }
            if probe.peek() == Some(&'^') {
                match lexer.next_token()? {
                    Some(Token::DatatypeMarker) => {}
                    other => return Err(lexer.error(format!("expected ^^, got {other:?}"))),
                }
                let dt_token = lexer
                    .next_token()?
                    .ok_or_else(|| lexer.error("expected datatype"))?;
                let datatype = expand_iri(&dt_token, prefixes, lexer)?;
                Ok(ReadTerm::Literal { lexical, datatype })
            } else {
                Ok(ReadTerm::Literal {
                    lexical,
                    datatype: format!("{XSD_NS}string"),
                })
            }
        }
        other => Err(lexer.error(format!("expected object term, got {other:?}"))),
    }
}

/// Reconstructs a knowledge base from an ABox document produced by
/// [`super::emit::emit_abox`] (either format). Labels are not part of the
/// ontology; every file comes back unlabeled until an examples sidecar is
/// applied.
pub fn load_abox(text: &str, vocab: &Vocabulary) -> Result<(KnowledgeBase, String), ReadError> {
    let (triples, prefixes) = parse_turtle(text)?;
    let namespace = find_namespace(&triples, &prefixes)?;

    let rdf_type = format!("{RDF_NS}type");
    let local = |iri: &str| -> Option<String> {
        iri.strip_prefix(&namespace).map(str::to_string)
    };

    // Subject -> asserted peo class local name.
    let mut types: BTreeMap<String, String> = BTreeMap::new();
    for t in &triples {
        if t.predicate == rdf_type {
            if let (Some(subject), ReadTerm::Iri(object)) = (local(&t.subject), &t.object) {
                if let Some(class) = local(object) {
                    types.insert(subject, class);
                }
            }
        }
    }

    let mut files: BTreeMap<String, PEFileIndividual> = BTreeMap::new();
    let mut sections: BTreeMap<String, SectionIndividual> = BTreeMap::new();
    let mut section_owner: BTreeMap<String, String> = BTreeMap::new();

    for (subject, class) in &types {
        if let Some(file_class) = FileClass::from_class_name(class) {
            files.insert(
                subject.clone(),
                PEFileIndividual {
                    sha256: subject.clone(),
                    file_class,
                    data: FileDataValues::default(),
                    features: Default::default(),
                    actions: Default::default(),
                    sections: Vec::new(),
                    label: -1,
                    avclass: None,
                },
            );
        } else if let Some(section_class) = SectionClass::from_class_name(class) {
            sections.insert(
                subject.clone(),
                SectionIndividual {
                    index: 0,
                    section_class,
                    section_name: String::new(),
                    section_entropy: 0.0,
                    flags: Default::default(),
                    features: Default::default(),
                },
            );
        } else {
            return Err(ReadError::UnknownClass(class.clone()));
        }
    }

    let bad = |subject: &str, message: String| ReadError::BadIndividual {
        subject: subject.to_string(),
        message,
    };

    for t in &triples {
        if t.predicate == rdf_type {
            continue;
        }
        let Some(subject) = local(&t.subject) else {
            continue; // ontology header
        };
        let Some(predicate) = local(&t.predicate) else {
            continue; // owl:imports
        };
        match predicate.as_str() {
            "has_section" => {
                let ReadTerm::Iri(object) = &t.object else {
                    return Err(bad(&subject, "has_section object is a literal".into()));
                };
                let section_local = local(object)
                    .ok_or_else(|| bad(&subject, format!("foreign section IRI {object}")))?;
                section_owner.insert(section_local, subject.clone());
            }
            "has_file_feature" => {
                let feature = prototype_local(&t.object, &local)?;
                let class = vocab
                    .class_of_prototype(&feature)
                    .ok_or_else(|| ReadError::UnknownPrototype(feature.clone()))?;
                let feature = FileFeature::from_class_name(class)
                    .ok_or_else(|| ReadError::UnknownPrototype(feature.clone()))?;
                file_mut(&mut files, &subject)?.features.insert(feature);
            }
            "has_action" => {
                let action = prototype_local(&t.object, &local)?;
                if vocab.action(&action).is_none() {
                    return Err(ReadError::UnknownPrototype(action));
                }
                file_mut(&mut files, &subject)?.actions.insert(action);
            }
            "has_section_flag" => {
                let flag = prototype_local(&t.object, &local)?;
                let class = vocab
                    .class_of_prototype(&flag)
                    .ok_or_else(|| ReadError::UnknownPrototype(flag.clone()))?;
                let flag = SectionFlag::from_class_name(class)
                    .ok_or_else(|| ReadError::UnknownPrototype(flag.clone()))?;
                section_mut(&mut sections, &subject)?.flags.insert(flag);
            }
            "has_section_feature" => {
                let feature = prototype_local(&t.object, &local)?;
                let class = vocab
                    .class_of_prototype(&feature)
                    .ok_or_else(|| ReadError::UnknownPrototype(feature.clone()))?;
                let feature = SectionFeature::from_class_name(class)
                    .ok_or_else(|| ReadError::UnknownPrototype(feature.clone()))?;
                section_mut(&mut sections, &subject)?.features.insert(feature);
            }
            "section_name" => {
                let ReadTerm::Literal { lexical, .. } = &t.object else {
                    return Err(bad(&subject, "section_name is not a literal".into()));
                };
                section_mut(&mut sections, &subject)?.section_name = lexical.clone();
            }
            "section_entropy" => {
                let ReadTerm::Literal { lexical, .. } = &t.object else {
                    return Err(bad(&subject, "section_entropy is not a literal".into()));
                };
                let value: f64 = lexical
                    .parse()
                    .map_err(|_| bad(&subject, format!("bad double literal {lexical}")))?;
                section_mut(&mut sections, &subject)?.section_entropy = value;
            }
            data_property => {
                let ReadTerm::Literal { lexical, .. } = &t.object else {
                    return Err(bad(&subject, format!("{data_property} is not a literal")));
                };
                let value: u64 = lexical
                    .parse()
                    .map_err(|_| bad(&subject, format!("bad integer literal {lexical}")))?;
                let file = file_mut(&mut files, &subject)?;
                if !file.data.set(data_property, value) {
                    return Err(bad(&subject, format!("unknown property {data_property}")));
                }
            }
        }
    }

    // Attach sections to their owners at the index encoded in the IRI.
    for (section_local, section) in sections {
        let owner = section_owner.get(&section_local).ok_or_else(|| {
            bad(&section_local, "section is not linked from any file".into())
        })?;
        let index = section_local
            .rsplit("_section_")
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad(&section_local, "IRI does not encode a section index".into()))?;
        let file = file_mut(&mut files, owner)?;
        file.sections.push(SectionIndividual { index, ..section });
    }

    let mut files: Vec<PEFileIndividual> = files.into_values().collect();
    for file in &mut files {
        file.sections.sort_by_key(|s| s.index);
    }
    files.sort_by(|a, b| a.sha256.cmp(&b.sha256));
    Ok((KnowledgeBase { files }, namespace))
}

fn find_namespace(
    triples: &[ReadTriple],
    prefixes: &BTreeMap<String, String>,
) -> Result<String, ReadError> {
    if let Some(ns) = prefixes.get("peo") {
        return Ok(ns.clone());
    }
    // N-Triples documents carry no prefixes; recover the namespace from the
    // ontology header's owl:imports target plus the separator used by any
    // individual IRI.
    let imports = format!("{}imports", super::term::OWL_NS);
    let ontology = triples
        .iter()
        .find(|t| t.predicate == imports)
        .and_then(|t| match &t.object {
            ReadTerm::Iri(iri) => Some(iri.clone()),
            _ => None,
        })
        .ok_or(ReadError::MissingNamespace)?;
    let header = format!("{ontology}/abox");
    for t in triples {
        if t.subject == header {
            continue;
        }
        if let Some(rest) = t.subject.strip_prefix(ontology.as_str()) {
            if let Some(sep @ ('#' | '/')) = rest.chars().next() {
                return Ok(format!("{ontology}{sep}"));
            }
        }
    }
    Ok(format!("{ontology}#"))
}

fn prototype_local(
    object: &ReadTerm,
    local: &impl Fn(&str) -> Option<String>,
) -> Result<String, ReadError> {
    match object {
        ReadTerm::Iri(iri) => {
            local(iri).ok_or_else(|| ReadError::UnknownPrototype(iri.clone()))
        }
        ReadTerm::Literal { lexical, .. } => Err(ReadError::UnknownPrototype(lexical.clone())),
    }
}

fn file_mut<'a>(
    files: &'a mut BTreeMap<String, PEFileIndividual>,
    subject: &str,
) -> Result<&'a mut PEFileIndividual, ReadError> {
    files.get_mut(subject).ok_or_else(|| ReadError::BadIndividual {
        subject: subject.to_string(),
        message: "assertion on an undeclared file individual".to_string(),
    })
}

fn section_mut<'a>(
    sections: &'a mut BTreeMap<String, SectionIndividual>,
    subject: &str,
) -> Result<&'a mut SectionIndividual, ReadError> {
    sections.get_mut(subject).ok_or_else(|| ReadError::BadIndividual {
        subject: subject.to_string(),
        message: "assertion on an undeclared section individual".to_string(),
    })
}
