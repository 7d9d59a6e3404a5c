//! Shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod contract;
pub mod gen;
pub mod oracle;

use semcompose::assist::Catalog;
use semcompose::ontology::{OntologyFormat, OntologyStore};
use semcompose::registry::{ConditionalEffect, Registry, ServiceProfile, StatusPattern};

pub struct World {
    pub ontology: OntologyStore,
    pub registry: Registry,
}

impl World {
    pub fn new(triples: &str) -> Self {
        let mut ontology = OntologyStore::new();
        ontology.load(triples, OntologyFormat::Triples).expect("fixture ontology");
        ontology.classify();
        Self {
            ontology,
            registry: Registry::new(),
        }
    }

    pub fn with(mut self, profile: ServiceProfile) -> Self {
        self.registry.register(profile, &self.ontology).expect("fixture profile");
        self
    }

    pub fn catalog(&self) -> Catalog<'_> {
        Catalog {
            registry: &self.registry,
            ontology: &self.ontology,
        }
    }
}

pub fn classes(names: &[&str]) -> String {
    names
        .iter()
        .map(|n| format!("<{n}> <rdf:type> <owl:Class> .\n"))
        .collect()
}

pub fn sub(child: &str, parent: &str) -> String {
    format!("<{child}> <rdfs:subClassOf> <{parent}> .\n")
}

pub fn status(class: &str) -> StatusPattern {
    StatusPattern::new(class)
}

pub fn effect(label: &str, adds: &[&str], deletes: &[&str]) -> ConditionalEffect {
    let mut e = ConditionalEffect::new(label);
    e.adds = adds.iter().map(|c| status(c)).collect();
    e.deletes = deletes.iter().map(|c| status(c)).collect();
    e
}

/// Request-for-quote domain: quoting, ordering and a detailed quote.
pub fn rfq_world() -> World {
    let mut t = classes(&["RFQ", "Quote", "Order", "Invoice"]);
    t += &sub("DetailedQuote", "Quote");
    World::new(&t)
        .with(ServiceProfile::new("quote").input("rfq", "RFQ").output("quote", "Quote"))
        .with(ServiceProfile::new("order").input("quote", "Quote").output("order", "Order"))
}

/// The shipping-address consolidation scenario.
pub fn shipping_world() -> World {
    let mut t = classes(&["Order", "Shipment"]);
    t += &sub("warehouse_address", "ship_to_location");
    World::new(&t)
        .with(
            ServiceProfile::new("warehouse_lookup")
                .input("order", "Order")
                .output("warehouse_address", "warehouse_address"),
        )
        .with(
            ServiceProfile::new("shipping")
                .input("ship_to_location", "ship_to_location")
                .output("shipment", "Shipment"),
        )
}
