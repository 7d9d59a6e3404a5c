//! Ingestion formats for ontology documents.
//!
//! Two formats are accepted:
//!
//! * a line-oriented triple format, one `<subject> <predicate> <object> .`
//!   statement per line (see `docs/formats.md` for the grammar), and
//! * a structured JSON document with top-level `classes` and `properties`
//!   lists.
//!
//! Both are lowered to the same [`Triple`] list before they reach the store.

use serde::{Deserialize, Serialize};

use super::vocab;
use crate::error::ParseError;

/// Object position of a statement.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Iri(String),
    Literal(String),
}

impl Term {
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: Term) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object,
        }
    }

    /// Renders the statement in the line-oriented triple format.
    pub fn to_line(&self) -> String {
        let object = match &self.object {
            Term::Iri(iri) => format_iri(iri),
            Term::Literal(text) => format!("\"{}\"", escape_literal(text)),
        };
        format!(
            "{} {} {} .",
            format_iri(&self.subject),
            format_iri(&self.predicate),
            object
        )
    }
}

fn format_iri(iri: &str) -> String {
    if iri.starts_with("_:") {
        iri.to_string()
    } else {
        format!("<{iri}>")
    }
}

fn escape_literal(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OntologyFormat {
    Triples,
    Structured,
}

impl OntologyFormat {
    /// Picks a format from the first non-blank character: `{` means structured.
    pub fn sniff(document: &str) -> Self {
        match document.trim_start().chars().next() {
            Some('{') => OntologyFormat::Structured,
            _ => OntologyFormat::Triples,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "triples" | "nt" => Some(OntologyFormat::Triples),
            "structured" | "json" => Some(OntologyFormat::Structured),
            _ => None,
        }
    }
}

pub fn parse_document(document: &str, format: OntologyFormat) -> Result<Vec<Triple>, ParseError> {
    match format {
        OntologyFormat::Triples => parse_triples(document),
        OntologyFormat::Structured => parse_structured(document),
    }
}

pub fn parse_triples(document: &str) -> Result<Vec<Triple>, ParseError> {
    let mut triples = Vec::new();
    for (idx, line) in document.lines().enumerate() {
        let mut cursor = Cursor::new(line, idx + 1);
        cursor.skip_ws();
        if cursor.at_end() || cursor.peek() == Some('#') {
            continue;
        }
        let subject = cursor.resource()?;
        cursor.require_ws()?;
        let predicate = cursor.resource()?;
        cursor.require_ws()?;
        let object = cursor.object()?;
        cursor.skip_ws();
        cursor.expect('.')?;
        cursor.skip_ws();
        if !cursor.at_end() && cursor.peek() != Some('#') {
            return Err(cursor.error("unexpected content after '.'"));
        }
        triples.push(Triple {
            subject: vocab::expand(&subject),
            predicate: vocab::expand(&predicate),
            object: match object {
                Term::Iri(iri) => Term::Iri(vocab::expand(&iri)),
                lit => lit,
            },
        });
    }
    Ok(triples)
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Self {
            chars: src.char_indices().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.column(), message)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn require_ws(&mut self) -> Result<(), ParseError> {
        if !matches!(self.peek(), Some(' ' | '\t')) {
            return Err(self.error("expected whitespace between terms"));
        }
        self.skip_ws();
        Ok(())
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.error(format!("expected '{want}', found '{c}'"))),
            None => Err(self.error(format!("expected '{want}', found end of line"))),
        }
    }

    /// `<iri>` or `_:label`.
    fn resource(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some('<') => self.iri(),
            Some('_') => self.blank(),
            Some('"') => Err(self.error("literal not allowed in this position")),
            Some(c) => Err(self.error(format!("expected '<' or '_:', found '{c}'"))),
            None => Err(self.error("unexpected end of line")),
        }
    }

    fn object(&mut self) -> Result<Term, ParseError> {
        if self.peek() == Some('"') {
            self.literal().map(Term::Literal)
        } else {
            self.resource().map(Term::Iri)
        }
    }

    fn iri(&mut self) -> Result<String, ParseError> {
        let start = self.column();
        self.expect('<')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) if c == '<' || c == '"' || c == ' ' || c == '\t' => {
                    return Err(self.error(format!("character '{c}' not allowed in IRI")));
                }
                Some(c) => out.push(c),
                None => return Err(ParseError::new(self.line, start, "unterminated IRI")),
            }
        }
        if out.is_empty() {
            return Err(ParseError::new(self.line, start, "empty IRI"));
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String, ParseError> {
        self.expect('_')?;
        self.expect(':')?;
        let mut out = String::from("_:");
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' || c == '-' {
                out.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        if out.len() == 2 {
            return Err(self.error("empty blank node label"));
        }
        Ok(out)
    }

    fn literal(&mut self) -> Result<String, ParseError> {
        let start = self.column();
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('"') => break,
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(c) => return Err(self.error(format!("unknown escape '\\{c}'"))),
                    None => return Err(ParseError::new(self.line, start, "unterminated literal")),
                },
                Some(c) => out.push(c),
                None => return Err(ParseError::new(self.line, start, "unterminated literal")),
            }
        }
        // Language tags and datatypes are accepted and dropped.
        match self.peek() {
            Some('@') => {
                self.pos += 1;
                let mut tag = 0;
                while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '-') {
                    self.pos += 1;
                    tag += 1;
                }
                if tag == 0 {
                    return Err(self.error("empty language tag"));
                }
            }
            Some('^') => {
                self.pos += 1;
                self.expect('^')?;
                self.iri()?;
            }
            _ => {}
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredDocument {
    #[serde(default)]
    classes: Vec<StructuredClass>,
    #[serde(default)]
    properties: Vec<StructuredProperty>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredClass {
    iri: String,
    #[serde(default)]
    subclass_of: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StructuredProperty {
    iri: String,
    #[serde(default)]
    subproperty_of: Vec<String>,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    range: Option<String>,
}

pub fn parse_structured(document: &str) -> Result<Vec<Triple>, ParseError> {
    if document.trim().is_empty() {
        return Ok(Vec::new());
    }
    let doc: StructuredDocument = serde_json::from_str(document)
        .map_err(|e| ParseError::new(e.line(), e.column(), e.to_string()))?;
    let mut triples = Vec::new();
    for class in doc.classes {
        check_iri(&class.iri)?;
        triples.push(Triple::new(
            &class.iri,
            vocab::RDF_TYPE,
            Term::Iri(vocab::OWL_CLASS.into()),
        ));
        for sup in class.subclass_of {
            check_iri(&sup)?;
            triples.push(Triple::new(&class.iri, vocab::RDFS_SUBCLASS_OF, Term::Iri(sup)));
        }
    }
    for prop in doc.properties {
        check_iri(&prop.iri)?;
        triples.push(Triple::new(
            &prop.iri,
            vocab::RDF_TYPE,
            Term::Iri(vocab::RDF_PROPERTY.into()),
        ));
        for sup in prop.subproperty_of {
            check_iri(&sup)?;
            triples.push(Triple::new(&prop.iri, vocab::RDFS_SUBPROPERTY_OF, Term::Iri(sup)));
        }
        if let Some(domain) = prop.domain {
            check_iri(&domain)?;
            triples.push(Triple::new(&prop.iri, vocab::RDFS_DOMAIN, Term::Iri(domain)));
        }
        if let Some(range) = prop.range {
            check_iri(&range)?;
            triples.push(Triple::new(&prop.iri, vocab::RDFS_RANGE, Term::Iri(range)));
        }
    }
    Ok(triples)
}

fn check_iri(iri: &str) -> Result<(), ParseError> {
    if iri.trim().is_empty() {
        Err(ParseError::new(0, 0, "empty IRI in structured document"))
    } else {
        Ok(())
    }
}
