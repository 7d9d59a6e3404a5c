mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use semcompose::planner::{build_graph, extract_plans, AbstractRequest, PlanToken};
use semcompose::registry::ServiceProfile;

use common::gen::{random_domain, Shape};
use common::oracle::{canonical_plan, Model};
use common::{classes, effect, status, World};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn plans_pass_forward_simulation(seed in any::<u64>()) {
        let (w, r) = random_domain(seed, &Shape::VALIDITY);
        let model = Model::new(&w.ontology, &w.registry, &r);
        let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
        for p in extract_plans(&mut g, None, 5).plans {
            prop_assert!(model.plan_valid(&p), "invalid plan {:?}", canonical_plan(&p));
            prop_assert!(model.removal_minimal(&model.ids(&p).unwrap()));
        }
    }

    #[test]
    fn exhaustive_extraction_matches_brute_force(seed in any::<u64>()) {
        let (w, r) = random_domain(seed, &Shape::COMPLETENESS);
        let model = Model::new(&w.ontology, &w.registry, &r);
        let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
        let ex = extract_plans(&mut g, None, usize::MAX);
        prop_assert!(ex.terminal);
        let got: BTreeSet<_> = ex.plans.iter().map(canonical_plan).collect();
        prop_assert_eq!(got.len(), ex.plans.len(), "duplicate plans");
        prop_assert_eq!(got, model.minimal_plans(r.horizon.unwrap()));
    }

    #[test]
    fn no_plan_coschedules_mutex_actions(seed in any::<u64>()) {
        let (w, r) = random_domain(seed, &Shape::COMPLETENESS);
        let model = Model::new(&w.ontology, &w.registry, &r);
        let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
        for p in extract_plans(&mut g, None, usize::MAX).plans {
            let v = model.mutex_violations(&p);
            prop_assert!(v.is_empty(), "{:?}", v);
        }
    }

    #[test]
    fn extraction_is_deterministic(seed in any::<u64>(), k in 1usize..4) {
        let (w, r) = random_domain(seed, &Shape::VALIDITY);
        let mut a = build_graph(&r, &w.registry, &w.ontology).unwrap();
        let mut b = build_graph(&r, &w.registry, &w.ontology).unwrap();
        prop_assert_eq!(extract_plans(&mut a, None, k).plans, extract_plans(&mut b, None, k).plans);
    }

    #[test]
    fn leveled_off_unreachability_is_final(seed in any::<u64>()) {
        let (w, mut r) = random_domain(seed, &Shape::VALIDITY);
        let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
        let stats = g.stats();
        if stats.leveled_off && extract_plans(&mut g, None, 0).terminal {
            r.horizon = Some(stats.levels + 10);
            let mut longer = build_graph(&r, &w.registry, &w.ontology).unwrap();
            prop_assert!(extract_plans(&mut longer, None, 1).plans.is_empty());
            prop_assert_eq!(longer.stats().levels, stats.levels);
        }
    }
}

/// Three interchangeable quoting services: three one-step plans.
fn three_quoters() -> World {
    World::new(&classes(&["RFQ", "Quote"]))
        .with(ServiceProfile::new("qa").input("rfq", "RFQ").output("quote", "Quote"))
        .with(ServiceProfile::new("qb").input("rfq", "RFQ").output("quote", "Quote"))
        .with(ServiceProfile::new("qc").input("rfq", "RFQ").output("quote", "Quote"))
}

#[test]
fn one_at_a_time_through_tokens() {
    let w = three_quoters();
    let r = AbstractRequest::simple(&["RFQ"], &["Quote"]);
    assert_eq!(Model::new(&w.ontology, &w.registry, &r).minimal_plans(4).len(), 3);
    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let first = extract_plans(&mut g, None, 2);
    assert_eq!(first.plans.len(), 2);
    assert!(!first.terminal);
    let token = PlanToken {
        basis: g.basis().clone(),
        cursor: first.cursor,
    }
    .encode();

    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let token = PlanToken::decode(&token).unwrap();
    token.check(&g).unwrap();
    let second = extract_plans(&mut g, Some(token.cursor), 2);
    assert_eq!(second.plans.len(), 1);
    let third = extract_plans(&mut g, Some(second.cursor), 2);
    assert!(third.plans.is_empty() && third.terminal);

    let all: BTreeSet<_> = first.plans.iter().chain(&second.plans).map(canonical_plan).collect();
    assert_eq!(all.len(), 3);
}

#[test]
fn token_from_another_request_is_refused() {
    let w = three_quoters();
    let r = AbstractRequest::simple(&["RFQ"], &["Quote"]);
    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let first = extract_plans(&mut g, None, 1);
    let token = PlanToken {
        basis: g.basis().clone(),
        cursor: first.cursor,
    };
    let mut other = AbstractRequest::simple(&["RFQ"], &["Quote"]);
    other.horizon = Some(9);
    let g2 = build_graph(&other, &w.registry, &w.ontology).unwrap();
    assert!(token.check(&g2).is_err());
}

#[test]
fn outcomes_are_assumed_and_reported() {
    let w = World::new(&classes(&["Doc", "approved", "rejected"])).with(
        ServiceProfile::new("review")
            .input("doc", "Doc")
            .effect(effect("pass", &["approved"], &[]))
            .effect(effect("fail", &["rejected"], &[])),
    );
    let mut r = AbstractRequest::simple(&["Doc"], &[]);
    r.goal_statuses = vec![status("approved")];
    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let ex = extract_plans(&mut g, None, 5);
    assert_eq!(ex.plans.len(), 1);
    let p = &ex.plans[0];
    assert_eq!(p.layers[0][0].outcome, "pass");
    assert_eq!(p.assumptions.len(), 1);
}

#[test]
fn both_outcomes_never_share_a_layer() {
    let w = World::new(&classes(&["Doc", "approved", "rejected"])).with(
        ServiceProfile::new("review")
            .input("doc", "Doc")
            .effect(effect("pass", &["approved"], &[]))
            .effect(effect("fail", &["rejected"], &[])),
    );
    let mut r = AbstractRequest::simple(&["Doc"], &[]);
    r.goal_statuses = vec![status("approved"), status("rejected")];
    let model = Model::new(&w.ontology, &w.registry, &r);
    let mut g = build_graph(&r, &w.registry, &w.ontology).unwrap();
    let ex = extract_plans(&mut g, None, usize::MAX);
    let got: BTreeSet<_> = ex.plans.iter().map(canonical_plan).collect();
    assert_eq!(got, model.minimal_plans(4));
    for p in &ex.plans {
        assert!(p.layers.iter().all(|l| l.len() == 1));
    }
}
