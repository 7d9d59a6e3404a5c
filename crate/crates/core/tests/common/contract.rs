//! The advisory contract, exercised through the session engine for every
//! suggestion kind: dismissing changes nothing, applying never raises the
//! targeted error count, and applying after an edit fails as stale.

use semcompose::assist::{error_count, unreachable_goals, Payload, Suggestion, SuggestionKind};
use semcompose::error::EngineError;
use semcompose::ontology::ClassRef;
use semcompose::planner::AbstractRequest;
use semcompose::process::{Placement, Step};
use semcompose::registry::ServiceProfile;
use semcompose::session::{Engine, Request, Response, SessionView};

pub const RFQ_TRIPLES: &str = "<RFQ> <rdf:type> <owl:Class> .\n\
<Quote> <rdf:type> <owl:Class> .\n\
<Order> <rdf:type> <owl:Class> .\n\
<Invoice> <rdf:type> <owl:Class> .\n\
<DetailedQuote> <rdfs:subClassOf> <Quote> .\n";

pub const SHIPPING_TRIPLES: &str = "<Order> <rdf:type> <owl:Class> .\n\
<Shipment> <rdf:type> <owl:Class> .\n\
<warehouse_address> <rdfs:subClassOf> <ship_to_location> .\n";

pub fn rfq_profiles() -> Vec<ServiceProfile> {
    vec![
        ServiceProfile::new("quote").input("rfq", "RFQ").output("quote", "Quote"),
        ServiceProfile::new("order").input("quote", "Quote").output("order", "Order"),
    ]
}

pub fn shipping_profiles() -> Vec<ServiceProfile> {
    vec![
        ServiceProfile::new("warehouse_lookup")
            .input("order", "Order")
            .output("warehouse_address", "warehouse_address"),
        ServiceProfile::new("shipping")
            .input("ship_to_location", "ship_to_location")
            .output("shipment", "Shipment"),
    ]
}

pub fn engine(triples: &str, profiles: Vec<ServiceProfile>) -> Engine {
    let e = Engine::new();
    e.load_ontology(triples, None).unwrap();
    e.classify().unwrap();
    e.register(profiles).unwrap();
    e
}

/// Appends a step through the session's edit verb.
pub fn add_step(e: &Engine, sid: &str, id: &str, service: &str, at: Placement) -> Result<Response, EngineError> {
    let view = e.session(sid)?;
    let delta = view.process.insert_step_delta(id, Step::user(service), &at)?;
    e.invoke(sid, Request::EditProcess { delta })
}

/// An engine and a session primed for one suggestion kind, plus the verb
/// that produces the suggestions.
pub struct Scenario {
    pub name: &'static str,
    pub kind: SuggestionKind,
    pub engine: Engine,
    pub session: String,
    pub verb: Request,
}

pub fn scenario(name: &'static str) -> Scenario {
    let (kind, e, request, steps, verb): (_, _, _, Vec<(&str, &str, Placement)>, _) = match name {
        "consolidation" => (
            SuggestionKind::Consolidation,
            engine(SHIPPING_TRIPLES, shipping_profiles()),
            AbstractRequest::simple(&["Order"], &["Shipment"]),
            vec![("lookup", "warehouse_lookup", Placement::End), ("ship", "shipping", Placement::End)],
            Request::SuggestConsolidations {
                producer: "lookup".into(),
                consumer: "ship".into(),
            },
        ),
        "ordering" => (
            SuggestionKind::Ordering,
            engine(RFQ_TRIPLES, rfq_profiles()),
            AbstractRequest::simple(&["RFQ"], &["Order"]),
            vec![("o", "order", Placement::End), ("q", "quote", Placement::ParallelWith("o".into()))],
            Request::SuggestOrderings,
        ),
        "insertion" => (
            SuggestionKind::Insertion,
            engine(RFQ_TRIPLES, rfq_profiles()),
            AbstractRequest::simple(&["RFQ"], &["Order"]),
            vec![("o", "order", Placement::End)],
            Request::SuggestInsertions,
        ),
        "plan-adoption" => (
            SuggestionKind::Insertion,
            engine(RFQ_TRIPLES, rfq_profiles()),
            AbstractRequest::simple(&["RFQ"], &["Order"]),
            vec![],
            Request::Plan {
                k: 1,
                resume: None,
                restart: false,
            },
        ),
        "removal" => (
            SuggestionKind::Removal,
            engine(RFQ_TRIPLES, rfq_profiles()),
            AbstractRequest::simple(&["RFQ"], &["Order"]),
            vec![("q", "quote", Placement::End), ("o", "order", Placement::End)],
            Request::SuggestRemovals,
        ),
        "relaxation" => (
            SuggestionKind::Relaxation,
            engine(RFQ_TRIPLES, rfq_profiles()),
            AbstractRequest::simple(&["RFQ"], &["DetailedQuote"]),
            vec![],
            Request::Relax,
        ),
        other => panic!("no scenario '{other}'"),
    };
    let sid = e.create_session().unwrap();
    e.set_request(&sid, request).unwrap();
    for (id, service, at) in steps {
        add_step(&e, &sid, id, service, at).unwrap();
    }
    if name == "removal" {
        e.deregister("order").unwrap();
    }
    Scenario {
        name,
        kind,
        engine: e,
        session: sid,
        verb,
    }
}

pub const SCENARIOS: [&str; 6] = ["consolidation", "ordering", "insertion", "plan-adoption", "removal", "relaxation"];

impl Scenario {
    pub fn suggestions(&self) -> Vec<Suggestion> {
        match self.engine.invoke(&self.session, self.verb.clone()).unwrap() {
            Response::Suggestions { suggestions } => suggestions,
            Response::Plans { suggestions, .. } => suggestions,
            Response::Conflicts { report } => report.suggestions,
            other => panic!("{}: unexpected response {other:?}", self.name),
        }
    }

    pub fn view(&self) -> SessionView {
        self.engine.session(&self.session).unwrap()
    }

    /// Errors of the kinds `s` addresses; unreachable goals for request
    /// changes.
    pub fn targeted(&self, s: &Suggestion) -> usize {
        let snap = self.engine.snapshot();
        match &s.payload {
            Payload::Request(_) => {
                let r = self.view().request.unwrap();
                unreachable_goals(&r, snap.catalog()).unwrap().len()
            }
            Payload::Delta(_) => match self.engine.invoke(&self.session, Request::Verify).unwrap() {
                Response::Diagnostics { diagnostics } => error_count(&diagnostics, &s.addresses),
                other => panic!("unexpected {other:?}"),
            },
        }
    }

    /// An edit that changes the state the suggestion was computed on.
    pub fn intervene(&self, s: &Suggestion) {
        match &s.payload {
            Payload::Request(_) => {
                let mut r = self.view().request.unwrap();
                r.available_inputs.push(ClassRef::new("Invoice"));
                self.engine.set_request(&self.session, r).unwrap();
            }
            Payload::Delta(_) => {
                let service = self.engine.services()[0].id.clone();
                add_step(&self.engine, &self.session, "extra", &service, Placement::End).unwrap();
            }
        }
    }
}

fn same_state(a: &SessionView, b: &SessionView) -> bool {
    a.process == b.process && a.process_hash == b.process_hash && a.history_len == b.history_len && a.request == b.request
}

/// Runs the three clauses for one scenario; on success, a short summary.
pub fn check(name: &'static str) -> Result<String, String> {
    let base = scenario(name);
    let list = base.suggestions();
    if list.is_empty() {
        return Err(format!("{name}: no suggestions to test"));
    }
    if let Some(s) = list.iter().find(|s| s.kind != base.kind) {
        return Err(format!("{name}: unexpected kind {:?}", s.kind));
    }

    // Dismissal.
    let before = base.view();
    for s in &list {
        base.engine
            .invoke(&base.session, Request::DismissSuggestion { id: s.id.clone() })
            .map_err(|e| format!("{name}: dismiss failed: {e}"))?;
    }
    let after = base.view();
    if !same_state(&before, &after) {
        return Err(format!("{name}: dismissal changed the session"));
    }

    // Application, each suggestion on a fresh copy.
    for i in 0..list.len() {
        let sc = scenario(name);
        let s = sc.suggestions().remove(i);
        let errors_before = sc.targeted(&s);
        sc.engine
            .invoke(&sc.session, Request::ApplySuggestion { id: s.id.clone() })
            .map_err(|e| format!("{name}: applying {} failed: {e}", s.id))?;
        let errors_after = sc.targeted(&s);
        if errors_after > errors_before {
            return Err(format!(
                "{name}: applying {} raised targeted errors {errors_before} -> {errors_after}",
                s.id
            ));
        }
    }

    // Staleness.
    let sc = scenario(name);
    let s = sc.suggestions().remove(0);
    sc.intervene(&s);
    let before = sc.view();
    match sc.engine.invoke(&sc.session, Request::ApplySuggestion { id: s.id.clone() }) {
        Err(EngineError::StaleSuggestion(_)) => {}
        other => return Err(format!("{name}: expected a stale refusal, got {other:?}")),
    }
    if !same_state(&before, &sc.view()) {
        return Err(format!("{name}: stale application had side effects"));
    }
    Ok(format!("{name}: {} suggestion(s)", list.len()))
}
