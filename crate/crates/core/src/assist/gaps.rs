//! Closing gaps in a process and relaxing unsatisfiable requests.

use std::collections::{BTreeMap, BTreeSet};

use super::analysis::{analyze, Gap};
use super::{retain_sound, sort_suggestions, Catalog, Payload, Suggestion, SuggestionKind};
use crate::error::{AssistError, PlanError};
use crate::ontology::{ClassRef, Degree};
use crate::planner::{build_graph, extract_plans, plan_to_process, AbstractRequest, Plan, PlanGraph, Prop};
use crate::process::{CompositeProcess, Consolidation, ConsolidationEntry, Delta, EditOp, Placement, Provenance, Step};
use crate::registry::{Binding, Score, StatusPattern, Target};
use crate::semantics::{entails, SigValue, StatusKey};

fn pattern_of(key: &StatusKey) -> StatusPattern {
    let mut p = StatusPattern::new(key.class.clone());
    for (prop, v) in &key.sig {
        let b = match v {
            SigValue::Type(c) => Binding::Type(c.clone()),
            SigValue::Literal(l) => Binding::Literal(l.clone()),
        };
        p = p.bind(prop.clone(), b);
    }
    p
}

/// Inserts `layers` of services before `before`, returning the combined
/// delta and the step ids of the last layer.
fn insert_layers(
    process: &CompositeProcess,
    layers: &[Vec<(String, Option<String>)>],
    before: &str,
    catalog: Catalog<'_>,
) -> Result<(CompositeProcess, Delta, Vec<String>), AssistError> {
    let mut work = process.clone();
    let mut delta = Delta::default();
    let mut last = Vec::new();
    for layer in layers {
        last.clear();
        for (service, outcome) in layer {
            let id = work.fresh_step_id(service);
            let placement = match last.first() {
                None => Placement::Before(before.to_string()),
                Some(first) => Placement::ParallelWith(String::clone(first)),
            };
            let step = Step {
                service: service.clone(),
                outcome: outcome.clone(),
                provenance: Provenance::SuggestedAccepted,
            };
            let d = work.insert_step_delta(&id, step, &placement)?;
            work.apply(&d, Some(catalog.registry))?;
            delta = delta.then(d);
            last.push(id);
        }
    }
    Ok((work, delta, last))
}

/// Adds the best safe link from one of `producers` into `gap`'s input.
fn link_gap(work: &mut CompositeProcess, delta: &mut Delta, producers: &[String], gap: &Gap, catalog: Catalog<'_>) {
    let Some(input) = &gap.input else { return };
    let Some(cp) = catalog.registry.get(&work.steps[&gap.step].service) else { return };
    let Some(ty) = cp.param(input).map(|p| p.ty.clone()) else { return };
    let mut best: Option<((Degree, u32), String, String)> = None;
    for pid in producers {
        let Some(pp) = catalog.registry.get(&work.steps[pid].service) else { continue };
        for o in &pp.outputs {
            let d = catalog.ontology.match_degree_lenient(&o.ty, &ty);
            if d.degree.is_safe() && best.as_ref().is_none_or(|(k, ..)| d.rank_key() < *k) {
                best = Some((d.rank_key(), pid.clone(), o.name.clone()));
            }
        }
    }
    if let Some((_, producer, output)) = best {
        let d = Delta {
            ops: vec![EditOp::AddConsolidation(ConsolidationEntry {
                link: Consolidation {
                    producer,
                    output,
                    consumer: gap.step.clone(),
                    input: input.clone(),
                },
                provenance: Provenance::SuggestedAccepted,
            })],
        };
        if work.apply(&d, Some(catalog.registry)).is_ok() {
            delta.ops.extend(d.ops);
        }
    }
}

fn closes(
    work: &CompositeProcess,
    gap: &Gap,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<bool, AssistError> {
    let an = analyze(work, request, catalog, &[])?;
    Ok(!an.gaps.iter().any(|g| g.step == gap.step && g.need == gap.need))
}

fn describe(need: &Prop) -> String {
    match need {
        Prop::Avail(c) => format!("a value of type '{c}'"),
        Prop::Status(k) => format!("status {k}"),
    }
}

/// Services, or short chains found by the planner, that would supply a
/// need no earlier step guarantees.
pub fn suggest_insertions(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<Vec<Suggestion>, AssistError> {
    catalog.ontology.closure()?;
    let an = analyze(process, request, catalog, &[])?;
    let basis = process.content_hash();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for gap in &an.gaps {
        let target = match &gap.need {
            Prop::Avail(c) => Target::Class(c.clone()),
            Prop::Status(k) => Target::Status(pattern_of(k)),
        };
        let producers = catalog.registry.producers_of(&target, catalog.ontology).unwrap_or_default();
        let ids: Vec<&str> = producers.iter().map(|m| m.id.as_str()).collect();
        let wide = analyze(process, request, catalog, &ids)?;
        let pre = &wide.pre[&gap.step];
        let mut found = false;
        for m in &producers {
            let profile = catalog.registry.get(&m.id).expect("registered");
            let outcome = match &gap.need {
                Prop::Status(_) => m.criteria[0].matched_by.split(':').next().map(str::to_string),
                Prop::Avail(_) if profile.effects.len() == 1 => Some(profile.effects[0].label.clone()),
                Prop::Avail(_) => None,
            };
            let applicable = (0..wide.domain.action_count() as u32)
                .filter(|&a| wide.domain.action(a).service == m.id)
                .all(|a| wide.domain.applicable(a, pre));
            if !applicable {
                continue;
            }
            let layers = vec![vec![(m.id.clone(), outcome)]];
            let (mut work, mut delta, last) = insert_layers(process, &layers, &gap.step, catalog)?;
            link_gap(&mut work, &mut delta, &last, gap, catalog);
            if !closes(&work, gap, request, catalog)? || !seen.insert(serde_json::to_string(&delta).expect("delta serializes")) {
                continue;
            }
            found = true;
            let mut s = Suggestion::new(
                SuggestionKind::Insertion,
                Payload::Delta(delta),
                format!(
                    "insert '{}' before '{}' to supply {} ({})",
                    m.id,
                    gap.step,
                    describe(&gap.need),
                    m.criteria[0].criterion
                ),
                m.score,
                basis.clone(),
            );
            s.weak = m.weak;
            out.push(s);
        }
        if found {
            continue;
        }
        let mut sub = AbstractRequest::simple(&[], &[]);
        for (p, _) in pre.iter().enumerate().filter(|(_, h)| **h) {
            match wide.domain.prop(p as u32) {
                Prop::Avail(c) => sub.available_inputs.push(c.clone()),
                Prop::Status(k) => sub.initial_statuses.push(pattern_of(k)),
            }
        }
        match &gap.need {
            Prop::Avail(c) => sub.goal_outputs.push(c.clone()),
            Prop::Status(k) => sub.goal_statuses.push(pattern_of(k)),
        }
        if let Some(r) = request {
            sub.nonfunctional_filters = r.nonfunctional_filters.clone();
        }
        let mut graph = build_graph(&sub, catalog.registry, catalog.ontology)?;
        for plan in extract_plans(&mut graph, None, 3).plans {
            if plan.step_count() == 0 {
                continue;
            }
            let layers: Vec<Vec<(String, Option<String>)>> = plan
                .layers
                .iter()
                .map(|l| l.iter().map(|s| (s.service.clone(), Some(s.outcome.clone()))).collect())
                .collect();
            let (mut work, mut delta, last) = insert_layers(process, &layers, &gap.step, catalog)?;
            link_gap(&mut work, &mut delta, &last, gap, catalog);
            if !closes(&work, gap, request, catalog)? || !seen.insert(serde_json::to_string(&delta).expect("delta serializes")) {
                continue;
            }
            let chain: Vec<String> = plan
                .layers
                .iter()
                .map(|l| l.iter().map(|s| s.service.as_str()).collect::<Vec<_>>().join(" + "))
                .collect();
            out.push(Suggestion::new(
                SuggestionKind::Insertion,
                Payload::Delta(delta),
                format!(
                    "insert the chain {} before '{}' to supply {}",
                    chain.join(" then "),
                    gap.step,
                    describe(&gap.need)
                ),
                Score {
                    distance: plan.step_count() as u32,
                    ..Score::default()
                },
                basis.clone(),
            ));
        }
    }
    retain_sound(process, request, catalog, &mut out)?;
    sort_suggestions(&mut out);
    Ok(out)
}

/// A suggestion replacing the whole process with `plan`.
pub fn adopt_plan(process: &CompositeProcess, plan: &Plan, catalog: Catalog<'_>) -> Result<Suggestion, AssistError> {
    let mut next = plan_to_process(plan, catalog.registry, catalog.ontology)?;
    for s in next.steps.values_mut() {
        s.provenance = Provenance::SuggestedAccepted;
    }
    for c in &mut next.consolidations {
        c.provenance = Provenance::SuggestedAccepted;
    }
    let delta = process.replacement_delta(&next);
    let layers: Vec<String> = plan
        .layers
        .iter()
        .map(|l| {
            let names: Vec<String> = l.iter().map(|s| format!("{}[{}]", s.service, s.outcome)).collect();
            format!("{{{}}}", names.join(", "))
        })
        .collect();
    Ok(Suggestion::new(
        SuggestionKind::Insertion,
        Payload::Delta(delta),
        format!("adopt plan {} achieving {}", layers.join(" -> "), plan.achieves.join(", ")),
        Score {
            distance: plan.step_count() as u32,
            ..Score::default()
        },
        process.content_hash(),
    ))
}

fn goal_keys(request: &AbstractRequest) -> Vec<Prop> {
    request
        .goal_outputs
        .iter()
        .map(|c| Prop::Avail(c.clone()))
        .chain(request.goal_statuses.iter().map(|s| Prop::Status(StatusKey::of(s, None))))
        .collect()
}

/// Per goal (outputs first, then statuses): reachable on its own.
fn goal_flags(request: &AbstractRequest, catalog: Catalog<'_>) -> Result<(PlanGraph, Vec<bool>), AssistError> {
    let graph = build_graph(request, catalog.registry, catalog.ontology)?;
    let last = graph.last_level();
    let flags = goal_keys(request)
        .iter()
        .map(|k| {
            graph
                .domain()
                .requirement_id(k)
                .is_some_and(|r| !graph.live_supporters(r, last).is_empty())
        })
        .collect();
    Ok((graph, flags))
}

/// Goals that cannot be reached even on their own, as display strings.
pub fn unreachable_goals(request: &AbstractRequest, catalog: Catalog<'_>) -> Result<Vec<String>, AssistError> {
    let (_, flags) = goal_flags(request, catalog)?;
    Ok(goal_keys(request)
        .iter()
        .zip(flags)
        .filter(|(_, ok)| !ok)
        .map(|(k, _)| k.to_string())
        .collect())
}

fn goal_reachable(request: &AbstractRequest, index: usize, catalog: Catalog<'_>) -> Result<bool, AssistError> {
    match goal_flags(request, catalog) {
        Ok((_, flags)) => Ok(flags[index]),
        Err(AssistError::Plan(PlanError::NoGoals)) => Ok(false),
        Err(e) => Err(e),
    }
}

fn with_goal_class(request: &AbstractRequest, index: usize, class: ClassRef) -> AbstractRequest {
    let mut r = request.clone();
    let n = r.goal_outputs.len();
    if index < n {
        r.goal_outputs[index] = class;
    } else {
        r.goal_statuses[index - n].class = class;
    }
    r
}

fn without_goal(request: &AbstractRequest, index: usize) -> AbstractRequest {
    let mut r = request.clone();
    let n = r.goal_outputs.len();
    if index < n {
        r.goal_outputs.remove(index);
    } else {
        r.goal_statuses.remove(index - n);
    }
    r
}

/// Input types of services that could contribute, directly or through
/// other services, to `goal`.
fn frontier(goal: &Prop, catalog: Catalog<'_>) -> BTreeSet<ClassRef> {
    let ontology = catalog.ontology;
    let mut wanted: Vec<Prop> = vec![goal.clone()];
    let mut seen_wants: BTreeSet<Prop> = BTreeSet::new();
    let mut relevant: BTreeMap<&str, ()> = BTreeMap::new();
    let mut inputs = BTreeSet::new();
    while let Some(w) = wanted.pop() {
        if !seen_wants.insert(w.clone()) {
            continue;
        }
        for p in catalog.registry.profiles() {
            if relevant.contains_key(p.id.as_str()) {
                continue;
            }
            let contributes = match &w {
                Prop::Avail(c) => p
                    .outputs
                    .iter()
                    .any(|o| ontology.match_degree_lenient(&o.ty, c).degree.is_safe()),
                Prop::Status(k) => p.effects.iter().any(|e| {
                    e.adds
                        .iter()
                        .any(|a| entails(ontology, &StatusKey::of(a, Some(p)), k))
                }),
            };
            if !contributes {
                continue;
            }
            relevant.insert(p.id.as_str(), ());
            for i in &p.inputs {
                inputs.insert(i.ty.clone());
                wanted.push(Prop::Avail(i.ty.clone()));
            }
            for pre in &p.preconditions {
                wanted.push(Prop::Status(StatusKey::of(pre, Some(p))));
            }
        }
    }
    inputs
}

const MAX_INPUT_CANDIDATES: usize = 50;
const MAX_INPUT_SUGGESTIONS: usize = 5;

/// Ways to change a request whose goals cannot all be reached: generalize
/// a goal to its nearest reachable superclass, supply an extra input, or
/// drop the goal.
pub fn suggest_relaxations(
    request: &AbstractRequest,
    catalog: Catalog<'_>,
) -> Result<Vec<Suggestion>, AssistError> {
    let (graph, flags) = goal_flags(request, catalog)?;
    if graph.goals_reachable() {
        return Err(AssistError::RequestSatisfiable);
    }
    let basis = request.hash();
    let keys = goal_keys(request);
    let mut targets: Vec<usize> = (0..keys.len()).filter(|&i| !flags[i]).collect();
    if targets.is_empty() {
        targets = (0..keys.len()).collect();
    }
    let make = |r: AbstractRequest, why: String, score: Score| {
        Suggestion::new(SuggestionKind::Relaxation, Payload::Request(r), why, score, basis.clone())
    };
    let mut out = Vec::new();
    for i in targets {
        let key = &keys[i];
        let class = match key {
            Prop::Avail(c) => c.clone(),
            Prop::Status(k) => k.class.clone(),
        };
        if catalog.ontology.resolves(&class) {
            let mut best: Option<u32> = None;
            for (sup, dist) in catalog.ontology.ancestors(&class)? {
                if dist == 0 || best.is_some_and(|b| dist > b) {
                    continue;
                }
                let r = with_goal_class(request, i, sup.clone());
                if goal_reachable(&r, i, catalog)? {
                    best = Some(dist);
                    out.push(make(
                        r,
                        format!(
                            "goal {key} cannot be reached; its superclass '{sup}' can ({})",
                            catalog
                                .ontology
                                .subclass_path(&class, &sup)
                                .map(|p| p.iter().map(ClassRef::as_str).collect::<Vec<_>>().join(" ⊑ "))
                                .unwrap_or_default()
                        ),
                        Score {
                            plugin: 1,
                            distance: dist,
                            ..Score::default()
                        },
                    ));
                }
            }
        }
        let mut added = 0;
        for c in frontier(key, catalog)
            .into_iter()
            .filter(|c| {
                !request
                    .available_inputs
                    .iter()
                    .any(|a| catalog.ontology.match_degree_lenient(a, c).degree == Degree::Exact)
            })
            .take(MAX_INPUT_CANDIDATES)
        {
            let mut r = request.clone();
            r.available_inputs.push(c.clone());
            if goal_reachable(&r, i, catalog)? {
                out.push(make(
                    r,
                    format!("goal {key} becomes reachable if '{c}' is supplied as an input"),
                    Score::default(),
                ));
                added += 1;
                if added == MAX_INPUT_SUGGESTIONS {
                    break;
                }
            }
        }
        if keys.len() > 1 {
            out.push(make(
                without_goal(request, i),
                format!("drop goal {key}, which cannot be reached"),
                Score::default(),
            ));
        }
    }
    Ok(out)
}
