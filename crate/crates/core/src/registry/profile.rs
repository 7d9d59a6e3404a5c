//! Service profile documents: the persistence format for composable elements.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::RegistryError;
use crate::ontology::{ClassRef, OntologyStore};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ClassRef,
}

impl Param {
    pub fn new(name: impl Into<String>, ty: impl Into<ClassRef>) -> Self {
        Self {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

/// What a status property is bound to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// A parameter of the owning profile; stands for that parameter's type.
    Param(String),
    /// A class directly, used where no owning profile exists (requests, queries).
    Type(ClassRef),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusPattern {
    #[serde(rename = "class")]
    pub class: ClassRef,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bindings: BTreeMap<String, Binding>,
}

impl StatusPattern {
    pub fn new(class: impl Into<ClassRef>) -> Self {
        Self {
            class: class.into(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn bind(mut self, property: impl Into<String>, binding: Binding) -> Self {
        self.bindings.insert(property.into(), binding);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionalEffect {
    pub label: String,
    #[serde(default)]
    pub adds: Vec<StatusPattern>,
    #[serde(default)]
    pub deletes: Vec<StatusPattern>,
}

impl ConditionalEffect {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            adds: Vec::new(),
            deletes: Vec::new(),
        }
    }
}

pub const DEFAULT_EFFECT: &str = "default";

/// A non-functional attribute value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NfValue {
    Number(f64),
    Text(String),
    Class { class: ClassRef },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "subsumed_by")]
    SubsumedBy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NfFilter {
    pub attribute: String,
    pub op: Comparator,
    pub value: NfValue,
}

impl NfFilter {
    /// Evaluates the filter against a profile's attribute map. A missing
    /// attribute never passes.
    pub fn passes(&self, attrs: &BTreeMap<String, NfValue>, ontology: &OntologyStore) -> bool {
        use std::cmp::Ordering;
        let Some(actual) = attrs.get(&self.attribute) else {
            return false;
        };
        if self.op == Comparator::SubsumedBy {
            let (NfValue::Class { class: a }, NfValue::Class { class: b }) = (actual, &self.value) else {
                return false;
            };
            return ontology.subsumes(b, a).unwrap_or(false);
        }
        let ord = match (actual, &self.value) {
            (NfValue::Number(a), NfValue::Number(b)) => a.partial_cmp(b),
            (NfValue::Text(a), NfValue::Text(b)) => Some(a.cmp(b)),
            (NfValue::Class { class: a }, NfValue::Class { class: b }) => Some(a.cmp(b)),
            _ => None,
        };
        match (self.op, ord) {
            (Comparator::Ne, None) => true,
            (_, None) => false,
            (Comparator::Eq, Some(o)) => o == Ordering::Equal,
            (Comparator::Ne, Some(o)) => o != Ordering::Equal,
            (Comparator::Lt, Some(o)) => o == Ordering::Less,
            (Comparator::Le, Some(o)) => o != Ordering::Greater,
            (Comparator::Gt, Some(o)) => o == Ordering::Greater,
            (Comparator::Ge, Some(o)) => o != Ordering::Less,
            (Comparator::SubsumedBy, _) => unreachable!(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceProfile {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub inputs: Vec<Param>,
    #[serde(default)]
    pub outputs: Vec<Param>,
    #[serde(default)]
    pub preconditions: Vec<StatusPattern>,
    #[serde(default)]
    pub effects: Vec<ConditionalEffect>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub nonfunctional: BTreeMap<String, NfValue>,
}

impl ServiceProfile {
    pub fn new(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            inputs: Vec::new(),
            outputs: Vec::new(),
            preconditions: Vec::new(),
            effects: Vec::new(),
            nonfunctional: BTreeMap::new(),
        }
    }

    pub fn input(mut self, name: &str, ty: &str) -> Self {
        self.inputs.push(Param::new(name, ty));
        self
    }

    pub fn output(mut self, name: &str, ty: &str) -> Self {
        self.outputs.push(Param::new(name, ty));
        self
    }

    pub fn precondition(mut self, pattern: StatusPattern) -> Self {
        self.preconditions.push(pattern);
        self
    }

    pub fn effect(mut self, effect: ConditionalEffect) -> Self {
        self.effects.push(effect);
        self
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.inputs.iter().chain(&self.outputs).find(|p| p.name == name)
    }

    pub fn effect_named(&self, label: &str) -> Option<&ConditionalEffect> {
        self.effects.iter().find(|e| e.label == label)
    }

    /// Fills in defaults (display name, the single default effect) and checks
    /// structural invariants.
    pub fn normalize(mut self) -> Result<Self, RegistryError> {
        let invalid = |reason: String| RegistryError::InvalidProfile {
            id: self.id.clone(),
            reason,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id".into()));
        }
        if self.id.chars().any(|c| c.is_whitespace() || c == '/') {
            return Err(invalid("id must not contain whitespace or '/'".into()));
        }
        for (side, params) in [("input", &self.inputs), ("output", &self.outputs)] {
            let mut seen = BTreeSet::new();
            for p in params {
                if p.name.is_empty() {
                    return Err(invalid(format!("{side} with empty name")));
                }
                if !seen.insert(&p.name) {
                    return Err(invalid(format!("duplicate {side} '{}'", p.name)));
                }
            }
        }
        let mut labels = BTreeSet::new();
        for e in &self.effects {
            if !labels.insert(&e.label) {
                return Err(invalid(format!("duplicate effect label '{}'", e.label)));
            }
            if let Some(p) = e.adds.iter().find(|p| e.deletes.contains(p)) {
                return Err(invalid(format!(
                    "effect '{}' both adds and deletes {}",
                    e.label, p.class
                )));
            }
        }
        let patterns = self
            .preconditions
            .iter()
            .chain(self.effects.iter().flat_map(|e| e.adds.iter().chain(&e.deletes)));
        for pattern in patterns {
            for binding in pattern.bindings.values() {
                if let Binding::Param(name) = binding {
                    if self.param(name).is_none() {
                        return Err(invalid(format!("binding to unknown parameter '{name}'")));
                    }
                }
            }
        }
        if self.name.is_empty() {
            self.name = self.id.clone();
        }
        if self.effects.is_empty() {
            self.effects.push(ConditionalEffect::new(DEFAULT_EFFECT));
        }
        Ok(self)
    }

    /// Every class the profile refers to, in document order, deduplicated.
    pub fn class_refs(&self) -> Vec<&ClassRef> {
        let mut out: Vec<&ClassRef> = Vec::new();
        let mut seen = BTreeSet::new();
        let params = self.inputs.iter().chain(&self.outputs).map(|p| &p.ty);
        let patterns = self
            .preconditions
            .iter()
            .chain(self.effects.iter().flat_map(|e| e.adds.iter().chain(&e.deletes)));
        let mut pattern_refs = Vec::new();
        for p in patterns {
            pattern_refs.push(&p.class);
            for b in p.bindings.values() {
                if let Binding::Type(c) = b {
                    pattern_refs.push(c);
                }
            }
        }
        let nf = self.nonfunctional.values().filter_map(|v| match v {
            NfValue::Class { class } => Some(class),
            _ => None,
        });
        for c in params.chain(pattern_refs).chain(nf) {
            if seen.insert(c) {
                out.push(c);
            }
        }
        out
    }

    /// Annotation gaps: unresolved classes and undeclared bound properties.
    pub fn annotation_warnings(&self, ontology: &OntologyStore) -> Vec<String> {
        let mut warnings: Vec<String> = self
            .class_refs()
            .into_iter()
            .filter(|c| !ontology.resolves(c))
            .map(|c| format!("{}: unresolved class '{c}'", self.id))
            .collect();
        let mut props = BTreeSet::new();
        for p in self
            .preconditions
            .iter()
            .chain(self.effects.iter().flat_map(|e| e.adds.iter().chain(&e.deletes)))
        {
            props.extend(p.bindings.keys());
        }
        for prop in props {
            if !ontology.has_property(prop) {
                warnings.push(format!("{}: undeclared property '{prop}'", self.id));
            }
        }
        warnings
    }
}

/// A document holding several profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBundle {
    pub services: Vec<ServiceProfile>,
    /// Present when the bundle was exported from a composite process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<crate::process::CompositeProcess>,
}

/// Parses either a single profile or a `{"services": [...]}` bundle.
pub fn parse_profiles(document: &str) -> Result<Vec<ServiceProfile>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(document)?;
    if value.is_array() {
        serde_json::from_value(value)
    } else if value.get("services").is_some() && value.get("id").is_none() {
        Ok(serde_json::from_value::<ProfileBundle>(value)?.services)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}
