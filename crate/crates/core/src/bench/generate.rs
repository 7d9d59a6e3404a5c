//! Synthetic domains: a rooted class DAG padded with instance data, random
//! services over its classes, and requests built from what is producible.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchConfig, BenchError, OntologySource};
use crate::ontology::{ClassRef, OntologyFormat, OntologyStore};
use crate::planner::AbstractRequest;
use crate::registry::ServiceProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedRequest {
    pub request: AbstractRequest,
    /// Built to be unsatisfiable.
    pub adversarial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDomain {
    /// Line-oriented triple document.
    pub ontology: String,
    pub services: Vec<ServiceProfile>,
    pub requests: Vec<GeneratedRequest>,
}

fn class(i: usize) -> String {
    format!("C{i}")
}

/// Class `i` has parents among earlier classes, so the graph is a DAG
/// rooted at `C0`. Returns the document and the parent lists.
pub fn synthetic_ontology(
    classes: usize,
    max_depth: usize,
    branching: usize,
    extra_parent_rate: f64,
    target_triples: usize,
    rng: &mut ChaCha8Rng,
) -> (String, Vec<Vec<usize>>) {
    let mut doc = String::new();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut depth = vec![0usize; classes];
    let mut children = vec![0usize; classes];
    let mut open: Vec<usize> = vec![0];
    let mut triples = 0;
    let _ = writeln!(doc, "<C0> <rdf:type> <owl:Class> .");
    let _ = writeln!(doc, "<C0> <rdfs:label> \"class 0\" .");
    triples += 2;
    for i in 1..classes {
        let slot = rng.gen_range(0..open.len());
        let p = open[slot];
        parents[i].push(p);
        depth[i] = depth[p] + 1;
        children[p] += 1;
        if children[p] >= branching {
            open.swap_remove(slot);
        }
        if depth[i] < max_depth {
            open.push(i);
        }
        if i > 1 && rng.gen_bool(extra_parent_rate) {
            let q = rng.gen_range(0..i);
            if !parents[i].contains(&q) && depth[q] < depth[i] {
                parents[i].push(q);
            }
        }
        let _ = writeln!(doc, "<C{i}> <rdf:type> <owl:Class> .");
        let _ = writeln!(doc, "<C{i}> <rdfs:label> \"class {i}\" .");
        triples += 2;
        for &q in &parents[i] {
            let _ = writeln!(doc, "<C{i}> <rdfs:subClassOf> <C{q}> .");
            triples += 1;
        }
    }
    for (p, name) in ["memberOf", "worksFor", "advisor"].iter().enumerate() {
        let _ = writeln!(doc, "<{name}> <rdf:type> <owl:ObjectProperty> .");
        let _ = writeln!(doc, "<{name}> <rdfs:domain> <C{}> .", p % classes);
        triples += 2;
    }
    let mut n = 0;
    while triples < target_triples {
        let _ = writeln!(doc, "<i{n}> <rdf:type> <C{}> .", rng.gen_range(0..classes));
        triples += 1;
        if n > 0 && triples < target_triples {
            let _ = writeln!(doc, "<i{n}> <memberOf> <i{}> .", rng.gen_range(0..n));
            triples += 1;
        }
        n += 1;
    }
    (doc, parents)
}

fn draw(rng: &mut ChaCha8Rng, pool: &[String], max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max.max(1)).min(pool.len());
    pool.choose_multiple(rng, n).cloned().collect()
}

/// Every class some available value fits, after forward chaining from
/// `inputs` with plugin matching.
fn producible(ontology: &OntologyStore, services: &[ServiceProfile], inputs: &[String]) -> BTreeSet<String> {
    let mut fits: BTreeSet<String> = BTreeSet::new();
    let add = |fits: &mut BTreeSet<String>, c: &str| {
        let mut changed = fits.insert(c.to_string());
        for (a, _) in ontology.ancestors(&ClassRef::new(c)).unwrap_or_default() {
            changed |= fits.insert(a.as_str().to_string());
        }
        changed
    };
    for c in inputs {
        add(&mut fits, c);
    }
    let mut fired = vec![false; services.len()];
    loop {
        let mut changed = false;
        for (i, s) in services.iter().enumerate() {
            if fired[i] || !s.inputs.iter().all(|p| fits.contains(p.ty.as_str())) {
                continue;
            }
            fired[i] = true;
            for o in &s.outputs {
                changed |= add(&mut fits, o.ty.as_str());
            }
        }
        if !changed {
            return fits;
        }
    }
}

pub fn generate_domain(config: &BenchConfig) -> Result<GeneratedDomain, BenchError> {
    config.validate()?;
    let (ontology, names) = match &config.ontology {
        OntologySource::Synthetic(synth) => {
            if synth.classes < 2 {
                return Err(BenchError::Config("class count must be at least 2".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(synth.seed);
            let (doc, _) = synthetic_ontology(
                synth.classes,
                synth.max_depth,
                synth.branching,
                synth.extra_parent_rate,
                synth.target_triples,
                &mut rng,
            );
            (doc, (0..synth.classes).map(class).collect::<Vec<_>>())
        }
        OntologySource::File { path } => {
            let doc = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{path}: {e}")))?;
            let mut store = OntologyStore::new();
            store.load(&doc, OntologyFormat::sniff(&doc))?;
            let names: Vec<String> = store
                .classes()
                .filter(|c| !store.is_builtin(c))
                .map(|c| c.as_str().to_string())
                .collect();
            if names.len() < 2 {
                return Err(BenchError::Config("ontology file declares fewer than 2 classes".into()));
            }
            (doc, names)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.service_seed);
    let services: Vec<ServiceProfile> = (0..config.services)
        .map(|i| {
            let mut p = ServiceProfile::new(format!("s{i}"));
            for (k, c) in draw(&mut rng, &names, config.max_inputs).iter().enumerate() {
                p = p.input(&format!("in{k}"), c);
            }
            for (k, c) in draw(&mut rng, &names, config.max_outputs).iter().enumerate() {
                p = p.output(&format!("out{k}"), c);
            }
            p
        })
        .collect();

    let mut store = OntologyStore::new();
    store.load(&ontology, OntologyFormat::sniff(&ontology))?;
    store.classify();
    let produced: BTreeSet<&str> = services
        .iter()
        .flat_map(|s| s.outputs.iter().map(|o| o.ty.as_str()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.requests.seed);
    let mut requests = Vec::new();
    let mut attempts = 0;
    while requests.len() < config.requests.count && attempts < config.requests.count * 200 {
        attempts += 1;
        let inputs = draw(&mut rng, &names, config.requests.max_inputs);
        let given = producible(&store, &[], &inputs);
        let reach = producible(&store, &services, &inputs);
        let mut goals: Vec<&String> = reach
            .iter()
            .filter(|c| produced.contains(c.as_str()) && !given.contains(*c))
            .collect();
        if goals.is_empty() {
            continue;
        }
        goals.shuffle(&mut rng);
        goals.truncate(rng.gen_range(1..=config.requests.max_goals.max(1)));
        goals.sort();
        let mut r = AbstractRequest::simple(&[], &[]);
        r.available_inputs = inputs.iter().map(|c| ClassRef::new(c.as_str())).collect();
        r.goal_outputs = goals.iter().map(|c| ClassRef::new(c.as_str())).collect();
        r.max_plans = config.plans_per_request;
        requests.push(GeneratedRequest {
            request: r,
            adversarial: false,
        });
    }
    if requests.len() < config.requests.count {
        return Err(BenchError::Config(format!(
            "could only build {} of {} satisfiable requests",
            requests.len(),
            config.requests.count
        )));
    }
    for _ in 0..config.requests.unsatisfiable {
        let inputs = draw(&mut rng, &names, config.requests.max_inputs);
        let reach = producible(&store, &services, &inputs);
        let outside: Vec<&String> = names.iter().filter(|c| !reach.contains(*c)).collect();
        let Some(goal) = outside.choose(&mut rng) else { continue };
        let mut r = AbstractRequest::simple(&[], &[]);
        r.available_inputs = inputs.iter().map(|c| ClassRef::new(c.as_str())).collect();
        r.goal_outputs = vec![ClassRef::new(goal.as_str())];
        r.max_plans = config.plans_per_request;
        requests.push(GeneratedRequest {
            request: r,
            adversarial: true,
        });
    }
    Ok(GeneratedDomain {
        ontology,
        services,
        requests,
    })
}
