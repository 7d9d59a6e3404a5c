//! Service registry and semantic discovery.

mod discovery;
mod profile;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use discovery::{CriterionMatch, DiscoveryQuery, Score, ServiceMatch, Target};
pub use profile::{
    parse_profiles, Binding, Comparator, ConditionalEffect, NfFilter, NfValue, Param, ProfileBundle,
    ServiceProfile, StatusPattern, DEFAULT_EFFECT,
};

use crate::error::RegistryError;
use crate::ontology::OntologyStore;

#[derive(Clone, Debug)]
struct Entry {
    profile: Arc<ServiceProfile>,
    warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registered {
    pub id: String,
    pub warnings: Vec<String>,
    pub version: u64,
}

/// Profiles keyed by id. Iteration order is by id.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    services: BTreeMap<String, Entry>,
    version: u64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    /// Registers a profile. Unresolved annotations are accepted and reported
    /// as warnings.
    pub fn register(&mut self, profile: ServiceProfile, ontology: &OntologyStore) -> Result<Registered, RegistryError> {
        let profile = profile.normalize()?;
        if self.services.contains_key(&profile.id) {
            return Err(RegistryError::DuplicateId(profile.id));
        }
        let warnings = profile.annotation_warnings(ontology);
        let id = profile.id.clone();
        self.services.insert(
            id.clone(),
            Entry {
                profile: Arc::new(profile),
                warnings: warnings.clone(),
            },
        );
        self.version += 1;
        Ok(Registered {
            id,
            warnings,
            version: self.version,
        })
    }

    pub fn deregister(&mut self, id: &str) -> Result<Arc<ServiceProfile>, RegistryError> {
        let entry = self
            .services
            .remove(id)
            .ok_or_else(|| RegistryError::UnknownService(id.to_string()))?;
        self.version += 1;
        Ok(entry.profile)
    }

    pub fn get(&self, id: &str) -> Option<&ServiceProfile> {
        self.services.get(id).map(|e| e.profile.as_ref())
    }

    pub fn get_arc(&self, id: &str) -> Option<Arc<ServiceProfile>> {
        self.services.get(id).map(|e| e.profile.clone())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.services.contains_key(id)
    }

    pub fn warnings(&self, id: &str) -> Option<&[String]> {
        self.services.get(id).map(|e| e.warnings.as_slice())
    }

    pub fn profiles(&self) -> impl Iterator<Item = &ServiceProfile> {
        self.services.values().map(|e| e.profile.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::OntologyFormat;

    fn ontology() -> OntologyStore {
        let mut o = OntologyStore::new();
        o.load("<RFQ> <rdf:type> <owl:Class> .\n<Quote> <rdf:type> <owl:Class> .", OntologyFormat::Triples)
            .unwrap();
        o.classify();
        o
    }

    #[test]
    fn register_and_retrieve() {
        let o = ontology();
        let mut r = Registry::new();
        let done = r
            .register(ServiceProfile::new("QuoteService").input("rfq", "RFQ").output("quote", "Quote"), &o)
            .unwrap();
        assert!(done.warnings.is_empty());
        assert_eq!(r.get("QuoteService").unwrap().outputs[0].ty.as_str(), "Quote");
        assert_eq!(r.version(), 1);
    }

    #[test]
    fn duplicate_leaves_registry_unchanged() {
        let o = ontology();
        let mut r = Registry::new();
        r.register(ServiceProfile::new("a"), &o).unwrap();
        let err = r.register(ServiceProfile::new("a").output("x", "Quote"), &o).unwrap_err();
        assert_eq!(err, RegistryError::DuplicateId("a".into()));
        assert_eq!(r.version(), 1);
        assert!(r.get("a").unwrap().outputs.is_empty());
    }

    #[test]
    fn deregister_unknown_and_known() {
        let o = ontology();
        let mut r = Registry::new();
        assert_eq!(r.deregister("nope").unwrap_err(), RegistryError::UnknownService("nope".into()));
        r.register(ServiceProfile::new("a"), &o).unwrap();
        r.deregister("a").unwrap();
        assert!(r.is_empty());
        assert_eq!(r.version(), 2);
    }

    #[test]
    fn unresolved_annotation_is_a_warning() {
        let o = ontology();
        let mut r = Registry::new();
        let done = r.register(ServiceProfile::new("a").output("x", "Foo"), &o).unwrap();
        assert_eq!(done.warnings.len(), 1);
        assert_eq!(r.warnings("a").unwrap().len(), 1);
    }
}
