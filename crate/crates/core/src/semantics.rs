//! Structural matching of status objects.
//!
//! At design time a status binding carries no runtime value, only the type
//! (or literal) supplying it, so a status is matched on its class plus a
//! signature mapping each bound property to that type or literal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ontology::{ClassRef, Degree, MatchDegree, OntologyStore};
use crate::registry::{Binding, ServiceProfile, StatusPattern};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigValue {
    Type(ClassRef),
    Literal(String),
}

pub type Signature = BTreeMap<String, SigValue>;

/// A status grounded at the class-plus-signature level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StatusKey {
    pub class: ClassRef,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sig: Signature,
}

impl StatusKey {
    pub fn of(pattern: &StatusPattern, owner: Option<&ServiceProfile>) -> Self {
        StatusKey {
            class: pattern.class.clone(),
            sig: signature(pattern, owner),
        }
    }
}

impl std::fmt::Display for StatusKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.class)?;
        if !self.sig.is_empty() {
            let parts: Vec<String> = self
                .sig
                .iter()
                .map(|(p, v)| match v {
                    SigValue::Type(c) => format!("{p}: {c}"),
                    SigValue::Literal(l) => format!("{p}: \"{l}\""),
                })
                .collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Abstracts bindings to the types supplying them. A parameter binding
/// outside a profile is read as a class name.
pub fn signature(pattern: &StatusPattern, owner: Option<&ServiceProfile>) -> Signature {
    pattern
        .bindings
        .iter()
        .map(|(prop, binding)| {
            let value = match binding {
                Binding::Param(name) => SigValue::Type(
                    owner
                        .and_then(|p| p.param(name))
                        .map(|p| p.ty.clone())
                        .unwrap_or_else(|| ClassRef::new(name.clone())),
                ),
                Binding::Type(c) => SigValue::Type(c.clone()),
                Binding::Literal(l) => SigValue::Literal(l.clone()),
            };
            (prop.clone(), value)
        })
        .collect()
}

/// How well a supplied status satisfies a required one: the class degree if
/// it is safe and every required binding is entailed, `Fail` otherwise.
pub fn status_degree(ontology: &OntologyStore, supplied: &StatusKey, required: &StatusKey) -> MatchDegree {
    let class = ontology.match_degree_lenient(&supplied.class, &required.class);
    if !class.degree.is_safe() {
        return MatchDegree::FAIL;
    }
    let entailed = required.sig.iter().all(|(prop, want)| {
        supplied.sig.iter().any(|(have_prop, have)| {
            let prop_ok = have_prop == prop || ontology.subproperty(prop, have_prop).unwrap_or(false);
            prop_ok && value_entails(ontology, have, want)
        })
    });
    if entailed {
        class
    } else {
        MatchDegree::FAIL
    }
}

fn value_entails(ontology: &OntologyStore, have: &SigValue, want: &SigValue) -> bool {
    match (have, want) {
        (SigValue::Type(h), SigValue::Type(w)) => {
            ontology.match_degree_lenient(h, w).degree.is_safe()
        }
        (SigValue::Literal(h), SigValue::Literal(w)) => h == w,
        _ => false,
    }
}

pub fn entails(ontology: &OntologyStore, supplied: &StatusKey, required: &StatusKey) -> bool {
    status_degree(ontology, supplied, required).degree != Degree::Fail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::OntologyFormat;

    fn ontology() -> OntologyStore {
        let mut o = OntologyStore::new();
        o.load(
            "<submitted> <rdfs:subClassOf> <status> .\n\
             <PurchaseOrder> <rdfs:subClassOf> <Order> .\n\
             <order> <rdf:type> <rdf:Property> .\n\
             <purchaseOrder> <rdfs:subPropertyOf> <order> .",
            OntologyFormat::Triples,
        )
        .unwrap();
        o.classify();
        o
    }

    fn key(class: &str, sig: &[(&str, SigValue)]) -> StatusKey {
        StatusKey {
            class: class.into(),
            sig: sig.iter().map(|(p, v)| (p.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn param_bindings_abstract_to_types() {
        let profile = ServiceProfile::new("s").input("po", "PurchaseOrder");
        let pattern = StatusPattern::new("submitted").bind("order", Binding::Param("po".into()));
        let k = StatusKey::of(&pattern, Some(&profile));
        assert_eq!(k.sig["order"], SigValue::Type("PurchaseOrder".into()));
        assert_eq!(k.to_string(), "submitted(order: PurchaseOrder)");
    }

    #[test]
    fn entailment_uses_class_and_binding_subsumption() {
        let o = ontology();
        let po = SigValue::Type("PurchaseOrder".into());
        let order = SigValue::Type("Order".into());
        let have = key("submitted", &[("order", po.clone())]);
        assert_eq!(status_degree(&o, &have, &key("status", &[])).degree, Degree::Plugin);
        assert!(entails(&o, &have, &key("submitted", &[("order", order.clone())])));
        assert!(!entails(&o, &key("submitted", &[("order", order)]), &key("submitted", &[("order", po.clone())])));
        assert!(!entails(&o, &key("status", &[]), &key("submitted", &[])));
        assert!(!entails(&o, &key("submitted", &[]), &key("submitted", &[("order", po.clone())])));
        let via_sub = key("submitted", &[("purchaseOrder", po.clone())]);
        assert!(entails(&o, &via_sub, &key("submitted", &[("order", po)])));
    }

    #[test]
    fn literals_match_exactly() {
        let o = ontology();
        let gold = key("submitted", &[("tier", SigValue::Literal("gold".into()))]);
        let silver = key("submitted", &[("tier", SigValue::Literal("silver".into()))]);
        assert!(entails(&o, &gold, &gold));
        assert!(!entails(&o, &gold, &silver));
    }
}
