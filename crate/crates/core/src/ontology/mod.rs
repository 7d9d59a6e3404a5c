//! Lightweight ontology store: triples plus precomputed subclass and
//! subproperty closures.
//!
//! Only class/property declarations, `subClassOf`, `subPropertyOf`, `domain`
//! and `range` take part in reasoning. Every other statement is kept inert
//! and reported in a capability warning when loaded.
//!
//! Closures are recomputed only by [`OntologyStore::classify`], so loading
//! and reasoning can be timed separately. Queries against a store that
//! changed since its last classification fail with
//! [`OntologyError::StaleClosure`].

mod parse;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

pub use parse::{parse_document, parse_structured, parse_triples, OntologyFormat, Term, Triple};

use crate::error::OntologyError;

pub mod vocab {
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";

    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
    pub const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
    pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
    pub const RDFS_SUBPROPERTY_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subPropertyOf";
    pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
    pub const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
    pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
    pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
    pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
    pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
    pub const OWL_ANNOTATION_PROPERTY: &str = "http://www.w3.org/2002/07/owl#AnnotationProperty";

    /// Expands the `rdf:`, `rdfs:` and `owl:` prefixes; anything else is
    /// returned unchanged.
    pub fn expand(name: &str) -> String {
        for (prefix, ns) in [("rdf:", RDF), ("rdfs:", RDFS), ("owl:", OWL)] {
            if let Some(local) = name.strip_prefix(prefix) {
                return format!("{ns}{local}");
            }
        }
        name.to_string()
    }

    /// Inverse of [`expand`], used for diagnostics.
    pub fn compact(iri: &str) -> String {
        for (prefix, ns) in [("rdf:", RDF), ("rdfs:", RDFS), ("owl:", OWL)] {
            if let Some(local) = iri.strip_prefix(ns) {
                return format!("{prefix}{local}");
            }
        }
        iri.to_string()
    }
}

/// Primitive parameter types that always resolve, whatever is loaded.
pub const BUILTIN_CLASSES: [&str; 4] = ["String", "Integer", "Boolean", "BusinessObject"];

/// Reference to a class by IRI or prefixed name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassRef(String);

impl ClassRef {
    pub fn new(iri: impl Into<String>) -> Self {
        ClassRef(iri.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassRef {
    fn from(s: &str) -> Self {
        ClassRef(s.to_string())
    }
}

impl From<String> for ClassRef {
    fn from(s: String) -> Self {
        ClassRef(s)
    }
}

pub type ClassId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degree {
    Exact,
    Plugin,
    Subsume,
    Fail,
}

impl Degree {
    /// Exact and Plugin are safe for data to flow from provider to requirement.
    pub fn is_safe(self) -> bool {
        matches!(self, Degree::Exact | Degree::Plugin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchDegree {
    pub degree: Degree,
    /// Shortest asserted-edge path; `None` for [`Degree::Fail`].
    pub distance: Option<u32>,
}

impl MatchDegree {
    pub const FAIL: MatchDegree = MatchDegree {
        degree: Degree::Fail,
        distance: None,
    };

    pub fn exact() -> Self {
        MatchDegree {
            degree: Degree::Exact,
            distance: Some(0),
        }
    }

    /// Sort key: better matches first.
    pub fn rank_key(&self) -> (Degree, u32) {
        (self.degree, self.distance.unwrap_or(u32::MAX))
    }
}

#[derive(Clone, Debug, Default)]
struct ClassEntry {
    builtin: bool,
    supers: Vec<ClassId>,
}

#[derive(Clone, Debug, Default)]
struct PropertyEntry {
    supers: Vec<u32>,
    domain: Option<ClassId>,
    range: Option<ClassId>,
}

/// Reflexive-transitive closures computed by [`OntologyStore::classify`].
#[derive(Debug, Default)]
pub struct Closure {
    up: Vec<HashMap<ClassId, u32>>,
    down: Vec<Vec<ClassId>>,
    prop_up: Vec<HashMap<u32, u32>>,
}

impl Closure {
    /// `specific ⊑ general`.
    #[inline]
    pub fn is_sub(&self, specific: ClassId, general: ClassId) -> bool {
        specific == general || self.up[specific as usize].contains_key(&general)
    }

    pub fn distance(&self, specific: ClassId, general: ClassId) -> Option<u32> {
        self.up[specific as usize].get(&general).copied()
    }

    /// All classes subsuming `id`, itself included, with shortest distances.
    pub fn ancestors(&self, id: ClassId) -> impl Iterator<Item = (ClassId, u32)> + '_ {
        self.up[id as usize].iter().map(|(c, d)| (*c, *d))
    }

    /// All classes subsumed by `id`, itself included, in id order.
    pub fn descendants(&self, id: ClassId) -> &[ClassId] {
        &self.down[id as usize]
    }

    pub fn pair_count(&self) -> usize {
        self.up.iter().map(HashMap::len).sum()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct LoadReport {
    pub triples_added: usize,
    pub classes_added: usize,
    pub properties_added: usize,
    pub inert_statements: usize,
    pub warnings: Vec<String>,
    pub version: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassifyReport {
    pub classes: usize,
    pub properties: usize,
    pub subclass_pairs: usize,
    pub warnings: Vec<String>,
    pub version: u64,
}

#[derive(Clone, Debug)]
pub struct OntologyStore {
    triples: IndexSet<Triple>,
    classes: IndexMap<String, ClassEntry>,
    properties: IndexMap<String, PropertyEntry>,
    closure: Option<Arc<Closure>>,
    classified_version: Option<u64>,
    version: u64,
    warnings: Vec<String>,
}

impl Default for OntologyStore {
    fn default() -> Self {
        Self::new()
    }
}

enum Declared {
    Class,
    Property,
}

impl OntologyStore {
    /// An empty store holding only the built-in primitive classes; it starts
    /// out classified.
    pub fn new() -> Self {
        let mut classes = IndexMap::new();
        for name in BUILTIN_CLASSES {
            classes.insert(
                name.to_string(),
                ClassEntry {
                    builtin: true,
                    supers: Vec::new(),
                },
            );
        }
        let mut store = Self {
            triples: IndexSet::new(),
            classes,
            properties: IndexMap::new(),
            closure: None,
            classified_version: None,
            version: 0,
            warnings: Vec::new(),
        };
        store.classify();
        store
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn is_classified(&self) -> bool {
        self.classified_version == Some(self.version)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// Declared classes, built-ins excluded, in declaration order.
    pub fn classes(&self) -> impl Iterator<Item = ClassRef> + '_ {
        self.classes
            .iter()
            .filter(|(_, e)| !e.builtin)
            .map(|(iri, _)| ClassRef::new(iri.clone()))
    }

    pub fn class_count(&self) -> usize {
        self.classes.values().filter(|e| !e.builtin).count()
    }

    pub fn properties(&self) -> impl Iterator<Item = &str> {
        self.properties.keys().map(String::as_str)
    }

    /// Warnings accumulated by loads and classification.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_builtin(&self, class: &ClassRef) -> bool {
        self.classes
            .get(class.as_str())
            .is_some_and(|e| e.builtin)
    }

    pub fn resolves(&self, class: &ClassRef) -> bool {
        self.classes.contains_key(class.as_str())
    }

    pub fn has_property(&self, property: &str) -> bool {
        self.properties.contains_key(property)
    }

    pub fn class_id(&self, class: &ClassRef) -> Option<ClassId> {
        self.classes.get_index_of(class.as_str()).map(|i| i as ClassId)
    }

    pub fn class_iri(&self, id: ClassId) -> &str {
        self.classes
            .get_index(id as usize)
            .map(|(iri, _)| iri.as_str())
            .expect("class id out of range")
    }

    pub fn class_ref(&self, id: ClassId) -> ClassRef {
        ClassRef::new(self.class_iri(id))
    }

    /// Asserted direct superclasses.
    pub fn direct_supers(&self, class: &ClassRef) -> Result<Vec<ClassRef>, OntologyError> {
        let entry = self
            .classes
            .get(class.as_str())
            .ok_or_else(|| OntologyError::UnknownClass(class.to_string()))?;
        Ok(entry.supers.iter().map(|&s| self.class_ref(s)).collect())
    }

    pub fn property_domain(&self, property: &str) -> Option<ClassRef> {
        self.properties
            .get(property)
            .and_then(|p| p.domain)
            .map(|c| self.class_ref(c))
    }

    pub fn property_range(&self, property: &str) -> Option<ClassRef> {
        self.properties
            .get(property)
            .and_then(|p| p.range)
            .map(|c| self.class_ref(c))
    }

    /// The closure, provided the store has not changed since `classify`.
    pub fn closure(&self) -> Result<&Closure, OntologyError> {
        match (&self.closure, self.is_classified()) {
            (Some(c), true) => Ok(c),
            _ => Err(OntologyError::StaleClosure {
                current: self.version,
                classified: self.classified_version,
            }),
        }
    }

    fn require_id(&self, class: &ClassRef) -> Result<ClassId, OntologyError> {
        self.class_id(class)
            .ok_or_else(|| OntologyError::UnknownClass(class.to_string()))
    }

    /// Parses `document` and merges it. Atomic: on error the store is left
    /// untouched.
    pub fn load(&mut self, document: &str, format: OntologyFormat) -> Result<LoadReport, OntologyError> {
        let triples = parse_document(document, format)?;
        self.load_triples(triples)
    }

    pub fn load_triples(&mut self, triples: Vec<Triple>) -> Result<LoadReport, OntologyError> {
        // Pass 1: collect implied declarations and check for conflicts.
        let mut declared: IndexMap<&str, Declared> = IndexMap::new();
        let declare = |iri, kind, declared: &mut IndexMap<_, _>| self.declare(iri, kind, declared);
        for t in &triples {
            match classify_statement(t) {
                Statement::ClassDecl(s) => declare(s, Declared::Class, &mut declared)?,
                Statement::PropertyDecl(s) => declare(s, Declared::Property, &mut declared)?,
                Statement::SubClass(s, o) => {
                    declare(s, Declared::Class, &mut declared)?;
                    declare(o, Declared::Class, &mut declared)?;
                }
                Statement::SubProperty(s, o) => {
                    declare(s, Declared::Property, &mut declared)?;
                    declare(o, Declared::Property, &mut declared)?;
                }
                Statement::Domain(s, o) | Statement::Range(s, o) => {
                    declare(s, Declared::Property, &mut declared)?;
                    declare(o, Declared::Class, &mut declared)?;
                }
                Statement::Inert => {}
            }
        }

        // Pass 2: merge.
        let mut report = LoadReport::default();
        for (iri, kind) in declared {
            match kind {
                Declared::Class => {
                    if !self.classes.contains_key(iri) {
                        self.classes.insert(iri.to_string(), ClassEntry::default());
                        report.classes_added += 1;
                    }
                }
                Declared::Property => {
                    if !self.properties.contains_key(iri) {
                        self.properties.insert(iri.to_string(), PropertyEntry::default());
                        report.properties_added += 1;
                    }
                }
            }
        }
        let mut inert: BTreeMap<String, usize> = BTreeMap::new();
        for t in triples {
            match classify_statement(&t) {
                Statement::SubClass(s, o) => {
                    let (s, o) = (self.class_index(s), self.class_index(o));
                    let supers = &mut self.classes[s as usize].supers;
                    if !supers.contains(&o) {
                        supers.push(o);
                    }
                }
                Statement::SubProperty(s, o) => {
                    let (s, o) = (self.property_index(s), self.property_index(o));
                    let supers = &mut self.properties[s as usize].supers;
                    if !supers.contains(&o) {
                        supers.push(o);
                    }
                }
                Statement::Domain(s, o) => {
                    let (s, o) = (self.property_index(s), self.class_index(o));
                    self.properties[s as usize].domain = Some(o);
                }
                Statement::Range(s, o) => {
                    let (s, o) = (self.property_index(s), self.class_index(o));
                    self.properties[s as usize].range = Some(o);
                }
                Statement::ClassDecl(_) | Statement::PropertyDecl(_) => {}
                Statement::Inert => {
                    if !self.triples.contains(&t) {
                        *inert.entry(t.predicate.clone()).or_default() += 1;
                    }
                }
            }
            if self.triples.insert(t) {
                report.triples_added += 1;
            }
        }

        report.inert_statements = inert.values().sum();
        let flagged: Vec<String> = inert
            .iter()
            .filter(|(p, _)| {
                p.starts_with(vocab::OWL)
                    || ((p.starts_with(vocab::RDFS) || p.starts_with(vocab::RDF))
                        && p.as_str() != vocab::RDFS_LABEL
                        && p.as_str() != vocab::RDF_TYPE)
            })
            .map(|(p, n)| format!("{} ({n})", vocab::compact(p)))
            .collect();
        if !flagged.is_empty() {
            report.warnings.push(format!(
                "unsupported vocabulary stored inert: {}",
                flagged.join(", ")
            ));
        }
        self.warnings.extend(report.warnings.iter().cloned());
        self.version += 1;
        report.version = self.version;
        Ok(report)
    }

    fn declare<'a>(
        &self,
        iri: &'a str,
        kind: Declared,
        declared: &mut IndexMap<&'a str, Declared>,
    ) -> Result<(), OntologyError> {
        let clash = match kind {
            Declared::Class => {
                self.properties.contains_key(iri) || matches!(declared.get(iri), Some(Declared::Property))
            }
            Declared::Property => {
                self.classes.contains_key(iri) || matches!(declared.get(iri), Some(Declared::Class))
            }
        };
        if clash {
            return Err(OntologyError::ConflictingDeclaration(iri.to_string()));
        }
        declared.entry(iri).or_insert(kind);
        Ok(())
    }

    fn class_index(&self, iri: &str) -> ClassId {
        self.classes.get_index_of(iri).expect("declared in pass 1") as ClassId
    }

    fn property_index(&self, iri: &str) -> u32 {
        self.properties.get_index_of(iri).expect("declared in pass 1") as u32
    }

    /// Recomputes both closures from the asserted edges. Cycles are accepted;
    /// classes on a cycle subsume each other and a warning is recorded.
    pub fn classify(&mut self) -> ClassifyReport {
        let mut report = ClassifyReport {
            version: self.version,
            ..Default::default()
        };
        if self.is_classified() {
            let closure = self.closure.as_ref().expect("classified");
            report.classes = self.class_count();
            report.properties = self.properties.len();
            report.subclass_pairs = closure.pair_count();
            return report;
        }

        let class_supers: Vec<&[ClassId]> = self.classes.values().map(|e| e.supers.as_slice()).collect();
        let up = bfs_closure(&class_supers);
        let mut down = vec![Vec::new(); up.len()];
        for (c, ancestors) in up.iter().enumerate() {
            for &a in ancestors.keys() {
                down[a as usize].push(c as ClassId);
            }
        }
        for d in &mut down {
            d.sort_unstable();
        }
        let prop_supers: Vec<&[u32]> = self.properties.values().map(|e| e.supers.as_slice()).collect();
        let prop_up = bfs_closure(&prop_supers);

        let mut on_cycle: Vec<ClassId> = Vec::new();
        for (c, ancestors) in up.iter().enumerate() {
            let c = c as ClassId;
            if ancestors.keys().any(|&a| a != c && up[a as usize].contains_key(&c)) {
                on_cycle.push(c);
            }
        }
        if !on_cycle.is_empty() {
            let names: Vec<&str> = on_cycle.iter().map(|&c| self.class_iri(c)).collect();
            report.warnings.push(format!(
                "subclass cycle: {} mutually subsume",
                names.join(", ")
            ));
        }

        let closure = Closure { up, down, prop_up };
        report.classes = self.class_count();
        report.properties = self.properties.len();
        report.subclass_pairs = closure.pair_count();
        self.closure = Some(Arc::new(closure));
        self.classified_version = Some(self.version);
        self.warnings.extend(report.warnings.iter().cloned());
        report
    }

    /// `specific ⊑ general`.
    pub fn subsumes(&self, general: &ClassRef, specific: &ClassRef) -> Result<bool, OntologyError> {
        let g = self.require_id(general)?;
        let s = self.require_id(specific)?;
        Ok(self.closure()?.is_sub(s, g))
    }

    /// `specific` is a subproperty of `general` (reflexive).
    pub fn subproperty(&self, general: &str, specific: &str) -> Result<bool, OntologyError> {
        let g = self
            .properties
            .get_index_of(general)
            .ok_or_else(|| OntologyError::UnknownProperty(general.to_string()))?;
        let s = self
            .properties
            .get_index_of(specific)
            .ok_or_else(|| OntologyError::UnknownProperty(specific.to_string()))?;
        let closure = self.closure()?;
        Ok(g == s || closure.prop_up[s].contains_key(&(g as u32)))
    }

    /// How well a `provided` type satisfies a `required` one.
    pub fn match_degree(&self, provided: &ClassRef, required: &ClassRef) -> Result<MatchDegree, OntologyError> {
        let p = self.require_id(provided)?;
        let r = self.require_id(required)?;
        let closure = self.closure()?;
        Ok(degree_by_id(closure, p, r))
    }

    /// Like [`match_degree`](Self::match_degree) but maps unresolved classes to
    /// `Fail` instead of an error.
    pub fn match_degree_lenient(&self, provided: &ClassRef, required: &ClassRef) -> MatchDegree {
        self.match_degree(provided, required).unwrap_or(MatchDegree::FAIL)
    }

    /// All strict and non-strict superclasses of `class`, nearest first, ties
    /// broken by IRI.
    pub fn ancestors(&self, class: &ClassRef) -> Result<Vec<(ClassRef, u32)>, OntologyError> {
        let id = self.require_id(class)?;
        let mut out: Vec<(ClassRef, u32)> = self
            .closure()?
            .ancestors(id)
            .map(|(c, d)| (self.class_ref(c), d))
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    /// A shortest chain of asserted `subClassOf` edges from `specific` up to
    /// `general`, both ends included.
    pub fn subclass_path(&self, specific: &ClassRef, general: &ClassRef) -> Option<Vec<ClassRef>> {
        let s = self.class_id(specific)?;
        let g = self.class_id(general)?;
        let mut prev: HashMap<ClassId, ClassId> = HashMap::new();
        let mut seen: HashSet<ClassId> = HashSet::from([s]);
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            if c == g {
                let mut path = vec![c];
                let mut cur = c;
                while let Some(&p) = prev.get(&cur) {
                    path.push(p);
                    cur = p;
                }
                path.reverse();
                return Some(path.into_iter().map(|c| self.class_ref(c)).collect());
            }
            let mut supers = self.classes[c as usize].supers.clone();
            supers.sort_by(|a, b| self.class_iri(*a).cmp(self.class_iri(*b)));
            for sup in supers {
                if seen.insert(sup) {
                    prev.insert(sup, c);
                    queue.push_back(sup);
                }
            }
        }
        None
    }
}

pub(crate) fn degree_by_id(closure: &Closure, provided: ClassId, required: ClassId) -> MatchDegree {
    if provided == required {
        return MatchDegree::exact();
    }
    if let Some(d) = closure.distance(provided, required) {
        return MatchDegree {
            degree: Degree::Plugin,
            distance: Some(d),
        };
    }
    if let Some(d) = closure.distance(required, provided) {
        return MatchDegree {
            degree: Degree::Subsume,
            distance: Some(d),
        };
    }
    MatchDegree::FAIL
}

/// Shortest-distance reflexive-transitive closure over `supers` edges.
fn bfs_closure<T: AsRef<[u32]>>(supers: &[T]) -> Vec<HashMap<u32, u32>> {
    let mut out = Vec::with_capacity(supers.len());
    let mut queue = VecDeque::new();
    for start in 0..supers.len() as u32 {
        let mut dist: HashMap<u32, u32> = HashMap::from([(start, 0)]);
        queue.clear();
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            for &sup in supers[c as usize].as_ref() {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(sup) {
                    e.insert(d + 1);
                    queue.push_back(sup);
                }
            }
        }
        out.push(dist);
    }
    out
}

enum Statement<'a> {
    ClassDecl(&'a str),
    PropertyDecl(&'a str),
    SubClass(&'a str, &'a str),
    SubProperty(&'a str, &'a str),
    Domain(&'a str, &'a str),
    Range(&'a str, &'a str),
    Inert,
}

fn classify_statement(t: &Triple) -> Statement<'_> {
    let s = t.subject.as_str();
    if s.starts_with("_:") {
        return Statement::Inert;
    }
    let o = match t.object.as_iri() {
        Some(o) if !o.starts_with("_:") => o,
        _ => return Statement::Inert,
    };
    match t.predicate.as_str() {
        vocab::RDF_TYPE => match o {
            vocab::OWL_CLASS | vocab::RDFS_CLASS => Statement::ClassDecl(s),
            vocab::RDF_PROPERTY
            | vocab::OWL_OBJECT_PROPERTY
            | vocab::OWL_DATATYPE_PROPERTY
            | vocab::OWL_ANNOTATION_PROPERTY => Statement::PropertyDecl(s),
            _ => Statement::Inert,
        },
        vocab::RDFS_SUBCLASS_OF => Statement::SubClass(s, o),
        vocab::RDFS_SUBPROPERTY_OF => Statement::SubProperty(s, o),
        vocab::RDFS_DOMAIN => Statement::Domain(s, o),
        vocab::RDFS_RANGE => Statement::Range(s, o),
        _ => Statement::Inert,
    }
}
