mod common;

use common::*;
use semcompose::assist::*;
use semcompose::error::AssistError;
use semcompose::ontology::ClassRef;
use semcompose::planner::{build_graph, extract_plans, plan_to_process, AbstractRequest};
use semcompose::process::{CompositeProcess, Construct, Placement, Step};
use semcompose::registry::ServiceProfile;

fn build(world: &World, steps: &[(&str, &str)], placements: &[Placement]) -> CompositeProcess {
    let mut p = CompositeProcess::default();
    for (i, (id, service)) in steps.iter().enumerate() {
        let at = placements.get(i).cloned().unwrap_or(Placement::End);
        let d = p.insert_step_delta(id, Step::user(*service), &at).unwrap();
        p.apply(&d, Some(&world.registry)).unwrap();
    }
    p
}

fn applied(world: &World, p: &CompositeProcess, s: &Suggestion) -> CompositeProcess {
    let mut next = p.clone();
    next.apply(s.delta().expect("delta payload"), Some(&world.registry)).unwrap();
    next
}

#[test]
fn warehouse_address_feeds_ship_to_location() {
    let w = shipping_world();
    let p = build(&w, &[("lookup", "warehouse_lookup"), ("ship", "shipping")], &[]);
    let s = suggest_consolidations(&p, "lookup", "ship", w.catalog()).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].kind, SuggestionKind::Consolidation);
    assert!(!s[0].weak);
    assert!(s[0].justification.contains("warehouse_address ⊑ ship_to_location"), "{}", s[0].justification);
    let next = applied(&w, &p, &s[0]);
    let link = &next.feeding("ship", "ship_to_location").unwrap().link;
    assert_eq!((link.producer.as_str(), link.output.as_str()), ("lookup", "warehouse_address"));
    let r = AbstractRequest::simple(&["Order"], &["Shipment"]);
    assert!(verify_all(&next, Some(&r), w.catalog()).unwrap().iter().all(|d| !d.is_error()));
}

#[test]
fn reverse_direction_is_weak() {
    let mut t = classes(&["X"]);
    t += &sub("warehouse_address", "ship_to_location");
    let w = World::new(&t)
        .with(ServiceProfile::new("general").input("x", "X").output("loc", "ship_to_location"))
        .with(ServiceProfile::new("specific").input("addr", "warehouse_address").output("x", "X"));
    let p = build(&w, &[("g", "general"), ("s", "specific")], &[]);
    let s = suggest_consolidations(&p, "g", "s", w.catalog()).unwrap();
    assert_eq!(s.len(), 1);
    assert!(s[0].weak);
    let next = applied(&w, &p, &s[0]);
    let d = verify_dataflow(&next, None, w.catalog());
    assert!(d.iter().any(|d| d.kind == DiagnosticKind::WeakMatch && !d.is_error()));
}

#[test]
fn exact_ranks_above_plugin() {
    let mut t = classes(&["In"]);
    t += &sub("B", "A");
    let w = World::new(&t)
        .with(ServiceProfile::new("p").input("i", "In").output("a", "A").output("b", "B"))
        .with(ServiceProfile::new("c").input("need", "A"));
    let p = build(&w, &[("p", "p"), ("c", "c")], &[]);
    let s = suggest_consolidations(&p, "p", "c", w.catalog()).unwrap();
    let outs: Vec<_> = s
        .iter()
        .map(|s| match &s.delta().unwrap().ops[0] {
            semcompose::process::EditOp::AddConsolidation(e) => e.link.output.clone(),
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(outs, ["a", "b"]);
}

#[test]
fn unknown_step_is_reported() {
    let w = shipping_world();
    let p = build(&w, &[("lookup", "warehouse_lookup")], &[]);
    assert_eq!(
        suggest_consolidations(&p, "lookup", "nope", w.catalog()),
        Err(AssistError::UnknownStep("nope".into()))
    );
}

#[test]
fn completion_links_unique_and_leaves_ties() {
    let w = shipping_world();
    let p = build(&w, &[("lookup", "warehouse_lookup"), ("ship", "shipping")], &[]);
    let c = complete_dataflow(&p, w.catalog());
    assert_eq!(c.applied.len(), 1);
    assert!(c.ambiguous.is_empty());
    assert!(c.process.feeding("ship", "ship_to_location").is_some());
    let mut back = c.process.clone();
    back.apply(&c.delta.inverse(), Some(&w.registry)).unwrap();
    assert_eq!(back, p);

    let t = classes(&["A", "In"]);
    let w = World::new(&t)
        .with(ServiceProfile::new("p").input("i", "In").output("x", "A").output("y", "A"))
        .with(ServiceProfile::new("c").input("a", "A"));
    let p = build(&w, &[("p", "p"), ("c", "c")], &[]);
    let c = complete_dataflow(&p, w.catalog());
    assert!(c.applied.is_empty());
    assert_eq!(c.ambiguous.len(), 2);
    assert_eq!(c.process, p);
    assert!(c.ambiguous.iter().all(|s| s.is_current(&c.process, None)));
}

#[test]
fn completion_ignores_later_steps() {
    let w = shipping_world();
    let p = build(&w, &[("ship", "shipping"), ("lookup", "warehouse_lookup")], &[]);
    let c = complete_dataflow(&p, w.catalog());
    assert!(c.delta.is_empty());
}

#[test]
fn unrelated_consolidation_is_a_type_mismatch() {
    let w = rfq_world();
    let p = build(&w, &[("q", "quote"), ("q2", "quote")], &[]);
    let mut bad = p.clone();
    let link = semcompose::process::ConsolidationEntry {
        link: semcompose::process::Consolidation {
            producer: "q".into(),
            output: "quote".into(),
            consumer: "q2".into(),
            input: "rfq".into(),
        },
        provenance: semcompose::process::Provenance::User,
    };
    bad.apply(
        &semcompose::process::Delta {
            ops: vec![semcompose::process::EditOp::AddConsolidation(link)],
        },
        Some(&w.registry),
    )
    .unwrap();
    let d = verify_dataflow(&bad, None, w.catalog());
    assert_eq!(error_count(&d, &[DiagnosticKind::TypeMismatch]), 1);
}

#[test]
fn request_inputs_bind_inputs() {
    let w = rfq_world();
    let p = build(&w, &[("q", "quote")], &[]);
    let d = verify_dataflow(&p, None, w.catalog());
    assert!(d.iter().any(|d| d.kind == DiagnosticKind::UnboundInput));
    let r = AbstractRequest::simple(&["RFQ"], &["Quote"]);
    assert!(verify_dataflow(&p, Some(&r), w.catalog()).is_empty());
}

#[test]
fn swapped_sequence_fails_controlflow() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["RFQ"], &["Order"]);
    let good = build(&w, &[("q", "quote"), ("o", "order")], &[]);
    assert!(verify_controlflow(&good, Some(&r), w.catalog()).unwrap().is_empty());
    let bad = build(&w, &[("o", "order"), ("q", "quote")], &[]);
    let d = verify_controlflow(&bad, Some(&r), w.catalog()).unwrap();
    assert_eq!(error_count(&d, &[DiagnosticKind::UnsatisfiedPrecondition]), 1);
    assert!(verify_controlflow(&CompositeProcess::default(), Some(&r), w.catalog())
        .unwrap()
        .is_empty());
}

#[test]
fn orderings_sequence_dependent_parallel_steps() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["RFQ"], &["Order"]);
    let p = build(&w, &[("o", "order"), ("q", "quote")], &[Placement::End, Placement::ParallelWith("o".into())]);
    let before = verify_all(&p, Some(&r), w.catalog()).unwrap();
    assert_eq!(error_count(&before, &[DiagnosticKind::UnsatisfiedPrecondition]), 1);
    let s = suggest_orderings(&p, Some(&r), w.catalog()).unwrap();
    assert_eq!(s.len(), 1, "{s:#?}");
    let next = applied(&w, &p, &s[0]);
    assert!(next.control.as_ref().unwrap().precedes("q", "o"));
    let after = verify_all(&next, Some(&r), w.catalog()).unwrap();
    assert_eq!(error_count(&after, &[DiagnosticKind::UnsatisfiedPrecondition]), 0);
}

#[test]
fn orderings_parallelize_independent_steps() {
    let t = classes(&["A", "B", "C", "D"]);
    let w = World::new(&t)
        .with(ServiceProfile::new("ab").input("a", "A").output("b", "B"))
        .with(ServiceProfile::new("cd").input("c", "C").output("d", "D"));
    let r = AbstractRequest::simple(&["A", "C"], &["B", "D"]);
    let p = build(&w, &[("ab", "ab"), ("cd", "cd")], &[]);
    let s = suggest_orderings(&p, Some(&r), w.catalog()).unwrap();
    assert_eq!(s.len(), 1);
    let next = applied(&w, &p, &s[0]);
    assert!(next.control.as_ref().unwrap().concurrent("ab", "cd"));
}

fn status_world() -> World {
    let t = classes(&["Doc", "Draft", "Submitted", "Archived"]);
    World::new(&t)
        .with(
            ServiceProfile::new("submit")
                .input("doc", "Doc")
                .precondition(status("Draft"))
                .effect(effect("ok", &["Submitted"], &["Draft"])),
        )
        .with(
            ServiceProfile::new("edit")
                .input("doc", "Doc")
                .precondition(status("Draft"))
                .effect(effect("ok", &["Draft"], &[])),
        )
        .with(
            ServiceProfile::new("archive")
                .input("doc", "Doc")
                .effect(effect("ok", &["Archived"], &[])),
        )
        .with(
            ServiceProfile::new("review")
                .input("doc", "Doc")
                .effect(effect("pass", &["Submitted"], &[]))
                .effect(effect("fail", &["Draft"], &[])),
        )
}

fn draft_request() -> AbstractRequest {
    let mut r = AbstractRequest::simple(&["Doc"], &[]);
    r.initial_statuses.push(status("Draft"));
    r.goal_statuses.push(status("Submitted"));
    r
}

#[test]
fn conflicting_candidate_is_sequenced_after() {
    let w = status_world();
    let r = draft_request();
    let p = build(&w, &[("edit", "edit")], &[]);
    let report = detect_conflicts(&p, "submit", None, &Placement::ParallelWith("edit".into()), Some(&r), w.catalog())
        .unwrap();
    assert_eq!(report.diagnostics.len(), 1);
    assert_eq!(report.diagnostics[0].kind, DiagnosticKind::MutexConflict);
    assert_eq!(report.suggestions.len(), 1);
    let next = applied(&w, &p, &report.suggestions[0]);
    assert!(next.control.as_ref().unwrap().precedes("edit", "submit"));
}

#[test]
fn independent_candidate_has_no_conflicts() {
    let w = status_world();
    let r = draft_request();
    let p = build(&w, &[("edit", "edit")], &[]);
    let report =
        detect_conflicts(&p, "archive", None, &Placement::ParallelWith("edit".into()), Some(&r), w.catalog()).unwrap();
    assert_eq!(report, ConflictReport::default());
    assert!(matches!(
        detect_conflicts(&p, "nope", None, &Placement::End, Some(&r), w.catalog()),
        Err(AssistError::UnknownService(_))
    ));
}

#[test]
fn same_service_outcomes_have_no_resolution() {
    let w = status_world();
    let r = draft_request();
    let mut p = CompositeProcess::default();
    let step = Step {
        outcome: Some("pass".into()),
        ..Step::user("review")
    };
    p.apply(&p.insert_step_delta("review", step, &Placement::End).unwrap(), Some(&w.registry))
        .unwrap();
    let report = detect_conflicts(
        &p,
        "review",
        Some("fail"),
        &Placement::ParallelWith("review".into()),
        Some(&r),
        w.catalog(),
    )
    .unwrap();
    assert_eq!(report.diagnostics.len(), 1);
    assert!(report.suggestions.is_empty());
}

#[test]
fn insertion_supplies_missing_quote() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["RFQ"], &["Order"]);
    let p = build(&w, &[("order", "order")], &[]);
    let s = suggest_insertions(&p, Some(&r), w.catalog()).unwrap();
    assert!(!s.is_empty());
    let next = applied(&w, &p, &s[0]);
    assert!(next.steps.values().any(|s| s.service == "quote"));
    assert!(verify_all(&next, Some(&r), w.catalog()).unwrap().iter().all(|d| !d.is_error()));
}

#[test]
fn insertion_falls_back_to_a_chain() {
    let t = classes(&["A", "B", "C", "D"]);
    let w = World::new(&t)
        .with(ServiceProfile::new("ab").input("a", "A").output("b", "B"))
        .with(ServiceProfile::new("bc").input("b", "B").output("c", "C"))
        .with(ServiceProfile::new("cd").input("c", "C").output("d", "D"));
    let r = AbstractRequest::simple(&["A"], &["D"]);
    let p = build(&w, &[("cd", "cd")], &[]);
    let s = suggest_insertions(&p, Some(&r), w.catalog()).unwrap();
    assert!(!s.is_empty());
    let next = applied(&w, &p, &s[0]);
    assert_eq!(next.steps.len(), 3);
    let ctl = next.control.as_ref().unwrap();
    assert!(ctl.precedes("ab", "bc") && ctl.precedes("bc", "cd"));
    assert!(verify_all(&next, Some(&r), w.catalog()).unwrap().iter().all(|d| !d.is_error()));
}

#[test]
fn relaxation_generalizes_goal() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["RFQ"], &["DetailedQuote"]);
    assert_eq!(unreachable_goals(&r, w.catalog()).unwrap(), ["avail(DetailedQuote)"]);
    let s = suggest_relaxations(&r, w.catalog()).unwrap();
    let Payload::Request(first) = &s[0].payload else { panic!() };
    assert_eq!(first.goal_outputs, [ClassRef::new("Quote")]);
    assert!(s[0].is_current(&CompositeProcess::default(), Some(&r)));
}

#[test]
fn relaxation_adds_input() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["Invoice"], &["Order"]);
    let s = suggest_relaxations(&r, w.catalog()).unwrap();
    assert!(s.iter().any(|s| matches!(&s.payload,
        Payload::Request(q) if q.available_inputs.contains(&ClassRef::new("RFQ")))));
    assert_eq!(
        suggest_relaxations(&AbstractRequest::simple(&["RFQ"], &["Order"]), w.catalog()),
        Err(AssistError::RequestSatisfiable)
    );
}

#[test]
fn removal_of_dangling_step() {
    let mut w = rfq_world();
    let p = build(&w, &[("q", "quote"), ("o", "order")], &[]);
    w.registry.deregister("order").unwrap();
    let d = verify_all(&p, None, w.catalog()).unwrap();
    assert_eq!(error_count(&d, &[DiagnosticKind::DanglingStep]), 1);
    let s = suggest_removals(&p, w.catalog()).unwrap();
    assert_eq!(s.len(), 1);
    let next = applied(&w, &p, &s[0]);
    assert!(!next.steps.contains_key("o"));
}

#[test]
fn adopted_plan_verifies() {
    let w = rfq_world();
    let r = AbstractRequest::simple(&["RFQ"], &["Order"]);
    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let plan = extract_plans(&mut g, None, 1).plans.remove(0);
    let p = plan_to_process(&plan, &w.registry, &w.ontology).unwrap();
    assert!(verify_all(&p, Some(&r), w.catalog()).unwrap().iter().all(|d| !d.is_error()));
    let s = adopt_plan(&CompositeProcess::default(), &plan, w.catalog()).unwrap();
    assert_eq!(s.kind, SuggestionKind::Insertion);
    let adopted = applied(&w, &CompositeProcess::default(), &s);
    assert_eq!((&adopted.control, adopted.steps.len()), (&p.control, p.steps.len()));
    assert_eq!(adopted.consolidations.len(), p.consolidations.len());
    assert!(matches!(p.control, Some(Construct::Sequence(_))));
}

mod random_plans {
    use super::*;
    use common::gen::{random_domain, Shape};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]

        #[test]
        fn converted_plans_verify_clean(seed in any::<u64>()) {
            let (w, r) = random_domain(seed, &Shape::VALIDITY);
            let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
            for plan in extract_plans(&mut g, None, 3).plans {
                let p = plan_to_process(&plan, &w.registry, &w.ontology).unwrap();
                let errors: Vec<_> = verify_all(&p, Some(&r), w.catalog()).unwrap().into_iter().filter(|d| d.is_error()).collect();
                prop_assert!(errors.is_empty(), "{:?}", errors);
                prop_assert_eq!(p.steps.len(), plan.layers.iter().map(Vec::len).sum::<usize>());
            }
        }
    }
}
