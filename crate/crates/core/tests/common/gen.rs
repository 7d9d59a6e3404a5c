//! Seeded random worlds for the planner suites.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semcompose::ontology::ClassRef;
use semcompose::planner::AbstractRequest;
use semcompose::registry::{Binding, ConditionalEffect, ServiceProfile, StatusPattern};

use super::oracle::{Fact, Model};
use super::World;

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_services: usize,
    pub max_params: usize,
    pub types: usize,
    pub statuses: usize,
    pub horizon: Option<usize>,
}

impl Shape {
    /// Up to 8 services with up to 3 parameters per side.
    pub const VALIDITY: Shape = Shape {
        max_services: 8,
        max_params: 3,
        types: 8,
        statuses: 4,
        horizon: None,
    };

    /// Up to 5 services, small enough for exhaustive search.
    pub const COMPLETENESS: Shape = Shape {
        max_services: 5,
        max_params: 3,
        types: 7,
        statuses: 3,
        horizon: Some(4),
    };
}

/// A random class DAG; `edges` are (child, parent) index pairs.
pub fn random_dag(rng: &mut impl Rng, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for child in 1..n {
        for parent in 0..child {
            if rng.gen_bool(density) {
                edges.push((child, parent));
            }
        }
    }
    edges
}

fn ty(i: usize) -> String {
    format!("T{i}")
}

fn st(i: usize) -> String {
    format!("S{i}")
}

fn pick(rng: &mut ChaCha8Rng, n: usize, lo: usize, hi: usize) -> Vec<usize> {
    let k = rng.gen_range(lo..=hi).min(n);
    let all: Vec<usize> = (0..n).collect();
    let mut v: Vec<usize> = all.choose_multiple(rng, k).copied().collect();
    v.sort();
    v
}

fn status_pattern(rng: &mut ChaCha8Rng, shape: &Shape, params: &[String]) -> StatusPattern {
    let mut p = StatusPattern::new(st(rng.gen_range(0..shape.statuses)).as_str());
    if !params.is_empty() && rng.gen_bool(0.25) {
        let name = params.choose(rng).unwrap().clone();
        p = p.bind("of", Binding::Param(name));
    }
    p
}

fn service(rng: &mut ChaCha8Rng, shape: &Shape, i: usize) -> ServiceProfile {
    let mut p = ServiceProfile::new(format!("s{i}"));
    for t in pick(rng, shape.types, 0, shape.max_params) {
        p = p.input(&format!("i{t}"), &ty(t));
    }
    for t in pick(rng, shape.types, 1, shape.max_params) {
        p = p.output(&format!("o{t}"), &ty(t));
    }
    let params: Vec<String> = p.inputs.iter().chain(&p.outputs).map(|q| q.name.clone()).collect();
    if rng.gen_bool(0.3) {
        p = p.precondition(status_pattern(rng, shape, &params));
    }
    let outcomes = if rng.gen_bool(0.25) { 2 } else { 1 };
    for k in 0..outcomes {
        let mut e = ConditionalEffect::new(if outcomes == 1 { "default".to_string() } else { format!("r{k}") });
        if rng.gen_bool(0.4) {
            e.adds.push(status_pattern(rng, shape, &params));
        }
        if rng.gen_bool(0.25) {
            let d = status_pattern(rng, shape, &params);
            if e.adds.iter().all(|a| a.class != d.class) {
                e.deletes.push(d);
            }
        }
        p = p.effect(e);
    }
    p
}

/// Classes, services and a request whose goals are reachable when deletes
/// are ignored. Goals may still be unsatisfiable.
pub fn random_domain(seed: u64, shape: &Shape) -> (World, AbstractRequest) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = String::new();
    for i in 0..shape.types {
        triples += &format!("<{}> <rdf:type> <owl:Class> .\n", ty(i));
    }
    for (c, p) in random_dag(&mut rng, shape.types, 0.15) {
        triples += &format!("<{}> <rdfs:subClassOf> <{}> .\n", ty(c), ty(p));
    }
    for i in 0..shape.statuses {
        triples += &format!("<{}> <rdf:type> <owl:Class> .\n", st(i));
    }
    for (c, p) in random_dag(&mut rng, shape.statuses, 0.2) {
        triples += &format!("<{}> <rdfs:subClassOf> <{}> .\n", st(c), st(p));
    }
    triples += "<of> <rdf:type> <owl:ObjectProperty> .\n";
    let mut world = World::new(&triples);
    let n = rng.gen_range(1..=shape.max_services);
    for i in 0..n {
        world = world.with(service(&mut rng, shape, i));
    }

    let mut request = AbstractRequest::simple(&[], &[]);
    request.horizon = shape.horizon;
    request.available_inputs = pick(&mut rng, shape.types, 1, 2)
        .into_iter()
        .map(|t| ClassRef::new(ty(t)))
        .collect();
    if rng.gen_bool(0.3) {
        request.initial_statuses.push(StatusPattern::new(st(rng.gen_range(0..shape.statuses)).as_str()));
    }
    let reach = relaxed_reach(&world, &request);
    let initial = Model::new(&world.ontology, &world.registry, &request).initial;
    let fresh: Vec<String> = reach
        .iter()
        .filter(|f| !initial.contains(*f))
        .filter_map(|f| match f {
            Fact::Avail(c) => Some(c.clone()),
            _ => None,
        })
        .collect();
    let statuses: Vec<String> = reach
        .iter()
        .filter_map(|f| match f {
            Fact::Status(c, _) => Some(c.clone()),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let count = rng.gen_range(1..=2);
    let mut goals: Vec<String> = fresh.choose_multiple(&mut rng, count).cloned().collect();
    if goals.is_empty() {
        goals.push(ty(rng.gen_range(0..shape.types)));
    }
    goals.sort();
    request.goal_outputs = goals.into_iter().map(ClassRef::new).collect();
    if !statuses.is_empty() && rng.gen_bool(0.3) {
        let s = statuses.choose(&mut rng).unwrap();
        request.goal_statuses.push(StatusPattern::new(s.as_str()));
    }
    (world, request)
}

/// Facts reachable when deletes and mutexes are ignored.
pub fn relaxed_reach(world: &World, request: &AbstractRequest) -> BTreeSet<Fact> {
    let model = Model::new(&world.ontology, &world.registry, request);
    let mut state = model.initial.clone();
    loop {
        let before = state.len();
        for a in 0..model.acts.len() {
            if model.applicable(a, &state) {
                state.extend(model.acts[a].adds.iter().cloned());
            }
        }
        if state.len() == before {
            return state;
        }
    }
}
