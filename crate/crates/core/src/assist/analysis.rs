//! Guaranteed-state simulation of a process's control tree.
//!
//! A proposition is guaranteed before a step if it holds under every
//! execution order and every outcome the tree allows. A step without an
//! assumed outcome keeps only what all its outcomes keep; parallel branches
//! lose whatever a sibling might delete; a choice keeps what every branch
//! keeps.

use std::collections::{BTreeMap, BTreeSet};

use super::{Catalog, Diagnostic, DiagnosticKind, Location};
use crate::error::AssistError;
use crate::planner::{AbstractRequest, ActId, Domain, Prop, PropId};
use crate::process::{CompositeProcess, Construct, StepId};
use crate::semantics::StatusKey;

/// A need of a step not guaranteed at its position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gap {
    pub step: StepId,
    pub need: Prop,
    /// The input behind an availability need.
    pub input: Option<String>,
}

#[derive(Debug)]
pub struct Analysis {
    pub domain: Domain,
    /// Candidate actions per step; empty for dangling steps.
    pub acts: BTreeMap<StepId, Vec<ActId>>,
    /// Guaranteed state before each step.
    pub pre: BTreeMap<StepId, Vec<bool>>,
    pub final_state: Vec<bool>,
    pub gaps: Vec<Gap>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Analysis {
    pub fn possible_dels(&self, step: &str) -> BTreeSet<PropId> {
        self.acts
            .get(step)
            .into_iter()
            .flatten()
            .flat_map(|&a| self.domain.action(a).dels.iter().copied())
            .collect()
    }

    pub fn possible_adds(&self, step: &str) -> BTreeSet<PropId> {
        self.acts
            .get(step)
            .into_iter()
            .flatten()
            .flat_map(|&a| self.domain.action(a).adds.iter().copied())
            .collect()
    }

    /// Whether some outcome of `a` statically conflicts with some outcome of `b`.
    pub fn steps_conflict(&self, a: &str, b: &str) -> Option<String> {
        let (Some(xs), Some(ys)) = (self.acts.get(a), self.acts.get(b)) else {
            return None;
        };
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .find(|&(x, y)| self.domain.conflict(x, y))
            .map(|(x, y)| conflict_reason(&self.domain, x, y, a, b))
    }

    /// Whether `b` uses something `a` produces: a consolidation or a
    /// possible add supporting one of `b`'s needs.
    pub fn depends(&self, process: &CompositeProcess, a: &str, b: &str) -> bool {
        if process
            .consolidations
            .iter()
            .any(|c| c.link.producer == a && c.link.consumer == b)
        {
            return true;
        }
        let adds = self.possible_adds(a);
        self.acts.get(b).into_iter().flatten().any(|&y| {
            self.domain.action(y).needs.iter().any(|&r| {
                self.domain
                    .requirement(r)
                    .supporters
                    .iter()
                    .any(|p| adds.contains(p) && !self.domain.initial().contains(p))
            })
        })
    }
}

/// Human-readable cause of a static conflict between actions `x` and `y`.
pub(crate) fn conflict_reason(domain: &Domain, x: ActId, y: ActId, xs: &str, ys: &str) -> String {
    let (ax, ay) = (domain.action(x), domain.action(y));
    if ax.service == ay.service {
        return format!(
            "'{xs}' and '{ys}' are alternative outcomes ('{}', '{}') of service '{}'",
            ax.outcome, ay.outcome, ax.service
        );
    }
    for (a, b, an, bn) in [(ax, ay, xs, ys), (ay, ax, ys, xs)] {
        if let Some(p) = a.dels.iter().find(|p| b.adds.contains(p)) {
            return format!("'{an}' deletes {} which '{bn}' adds", domain.prop(*p));
        }
        for &r in &b.needs {
            if let Some(p) = a.dels.iter().find(|p| domain.requirement(r).supporters.contains(p)) {
                return format!("'{an}' deletes {} which '{bn}' requires", domain.prop(*p));
            }
        }
    }
    format!("'{xs}' and '{ys}' are mutually exclusive")
}

fn minus(state: &[bool], dels: &BTreeSet<PropId>) -> Vec<bool> {
    let mut s = state.to_vec();
    for &p in dels {
        s[p as usize] = false;
    }
    s
}

struct Sim<'a> {
    process: &'a CompositeProcess,
    root: &'a Construct,
    catalog: Catalog<'a>,
    an: Analysis,
}

impl Sim<'_> {
    fn leaf_dels(&self, c: &Construct) -> BTreeSet<PropId> {
        c.leaves().into_iter().flat_map(|id| self.an.possible_dels(id)).collect()
    }

    fn run(&mut self, c: &Construct, state: Vec<bool>, branch: &str) -> Vec<bool> {
        match c {
            Construct::Step(id) => self.step(id, state, branch),
            Construct::Sequence(children) => children.iter().fold(state, |s, c| self.run(c, s, branch)),
            Construct::Parallel(children) => {
                let dels: Vec<BTreeSet<PropId>> = children.iter().map(|c| self.leaf_dels(c)).collect();
                for i in 0..children.len() {
                    for j in i + 1..children.len() {
                        self.check_mutex(&children[i], &children[j], branch);
                    }
                }
                let mut out = vec![false; state.len()];
                for (i, child) in children.iter().enumerate() {
                    let others: BTreeSet<PropId> = dels
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .flat_map(|(_, d)| d.iter().copied())
                        .collect();
                    let end = self.run(child, minus(&state, &others), branch);
                    for (o, v) in out.iter_mut().zip(minus(&end, &others)) {
                        *o |= v;
                    }
                }
                out
            }
            Construct::Choice(children) => {
                let mut out: Option<Vec<bool>> = None;
                for (i, child) in children.iter().enumerate() {
                    let label = if branch.is_empty() {
                        format!("choice branch {}", i + 1)
                    } else {
                        format!("{branch}, choice branch {}", i + 1)
                    };
                    let end = self.run(child, state.clone(), &label);
                    out = Some(match out {
                        None => end,
                        Some(acc) => acc.iter().zip(&end).map(|(a, b)| *a && *b).collect(),
                    });
                }
                out.unwrap_or(state)
            }
        }
    }

    fn check_mutex(&mut self, a: &Construct, b: &Construct, branch: &str) {
        for x in a.leaves() {
            for y in b.leaves() {
                if let Some(reason) = self.an.steps_conflict(x, y) {
                    let (first, second) = if x <= y { (x, y) } else { (y, x) };
                    self.an.diagnostics.push(Diagnostic::error(
                        DiagnosticKind::MutexConflict,
                        Location::Pair {
                            first: first.clone(),
                            second: second.clone(),
                        },
                        with_branch(format!("parallel steps conflict: {reason}"), branch),
                    ));
                }
            }
        }
    }

    fn step(&mut self, id: &StepId, state: Vec<bool>, branch: &str) -> Vec<bool> {
        self.an.pre.insert(id.clone(), state.clone());
        let acts = self.an.acts.get(id).cloned().unwrap_or_default();
        if acts.is_empty() {
            return state;
        }
        let step = &self.process.steps[id];
        let profile = self.catalog.registry.get(&step.service).expect("registered");
        let ontology = self.catalog.ontology;
        let domain = &self.an.domain;
        let mut found = Vec::new();
        for input in &profile.inputs {
            let loc = Location::Input {
                step: id.clone(),
                input: input.name.clone(),
            };
            if let Some(c) = self.process.feeding(id, &input.name) {
                if !self.root.precedes(&c.link.producer, id) {
                    found.push((
                        Diagnostic::error(
                            DiagnosticKind::UnsatisfiedPrecondition,
                            loc,
                            with_branch(
                                format!(
                                    "input '{}' is fed by '{}', which is not guaranteed to run before '{id}'",
                                    input.name, c.link.producer
                                ),
                                branch,
                            ),
                        ),
                        None,
                    ));
                }
                continue;
            }
            if !ontology.resolves(&input.ty) {
                found.push((
                    Diagnostic::warning(
                        DiagnosticKind::WeakMatch,
                        loc,
                        format!("input '{}' has type '{}', unknown to the ontology", input.name, input.ty),
                    ),
                    None,
                ));
                continue;
            }
            let need = Prop::Avail(input.ty.clone());
            let r = domain.requirement_id(&need).expect("compiled");
            if !domain.holds(r, &state) {
                found.push((
                    Diagnostic::error(
                        DiagnosticKind::UnsatisfiedPrecondition,
                        loc,
                        with_branch(
                            format!(
                                "no value of type '{}' is guaranteed available for input '{}' of '{id}'",
                                input.ty, input.name
                            ),
                            branch,
                        ),
                    ),
                    Some(Gap {
                        step: id.clone(),
                        need,
                        input: Some(input.name.clone()),
                    }),
                ));
            }
        }
        for pre in &profile.preconditions {
            let loc = Location::Precondition {
                step: id.clone(),
                class: pre.class.to_string(),
            };
            if !ontology.resolves(&pre.class) {
                found.push((
                    Diagnostic::warning(
                        DiagnosticKind::WeakMatch,
                        loc,
                        format!("precondition class '{}' is unknown to the ontology", pre.class),
                    ),
                    None,
                ));
                continue;
            }
            let key = StatusKey::of(pre, Some(profile));
            let need = Prop::Status(key.clone());
            let r = domain.requirement_id(&need).expect("compiled");
            if !domain.holds(r, &state) {
                found.push((
                    Diagnostic::error(
                        DiagnosticKind::UnsatisfiedPrecondition,
                        loc,
                        with_branch(format!("status {key} is not guaranteed to hold before '{id}'"), branch),
                    ),
                    Some(Gap {
                        step: id.clone(),
                        need,
                        input: None,
                    }),
                ));
            }
        }
        for (d, gap) in found {
            self.an.diagnostics.push(d);
            self.an.gaps.extend(gap);
        }
        let mut out: Option<Vec<bool>> = None;
        for &a in &acts {
            let act = self.an.domain.action(a);
            let mut s = state.clone();
            for &p in &act.dels {
                s[p as usize] = false;
            }
            for &p in &act.adds {
                s[p as usize] = true;
            }
            out = Some(match out {
                None => s,
                Some(acc) => acc.iter().zip(&s).map(|(a, b)| *a && *b).collect(),
            });
        }
        out.expect("non-empty")
    }
}

fn with_branch(text: String, branch: &str) -> String {
    if branch.is_empty() {
        text
    } else {
        format!("{text} (in {branch})")
    }
}

/// Simulates `process` from the request's initial state. `extra` names
/// further registered services to compile into the domain.
pub fn analyze(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
    extra: &[&str],
) -> Result<Analysis, AssistError> {
    let mut request = request.cloned().unwrap_or_else(|| AbstractRequest::simple(&[], &[]));
    request.nonfunctional_filters.clear();
    let services: BTreeSet<&str> = process
        .steps
        .values()
        .map(|s| s.service.as_str())
        .chain(extra.iter().copied())
        .filter(|s| catalog.registry.contains(s))
        .collect();
    let profiles: Vec<_> = services.iter().filter_map(|s| catalog.registry.get(s)).collect();
    let domain = Domain::compile(catalog.ontology, profiles, &request)?;

    let mut diagnostics = Vec::new();
    let mut acts = BTreeMap::new();
    for (id, step) in &process.steps {
        let ids: Vec<ActId> = if !catalog.registry.contains(&step.service) {
            diagnostics.push(Diagnostic::error(
                DiagnosticKind::DanglingStep,
                Location::Step { step: id.clone() },
                format!("step '{id}' refers to unregistered service '{}'", step.service),
            ));
            Vec::new()
        } else if let Some(o) = &step.outcome {
            match domain.action_id(&step.service, o) {
                Some(a) => vec![a],
                None => {
                    diagnostics.push(Diagnostic::error(
                        DiagnosticKind::DanglingStep,
                        Location::Step { step: id.clone() },
                        format!("service '{}' has no outcome '{o}'", step.service),
                    ));
                    Vec::new()
                }
            }
        } else {
            (0..domain.action_count() as ActId)
                .filter(|&a| domain.action(a).service == step.service)
                .collect()
        };
        acts.insert(id.clone(), ids);
    }
    let initial = domain.initial_state();
    let an = Analysis {
        domain,
        acts,
        pre: BTreeMap::new(),
        final_state: Vec::new(),
        gaps: Vec::new(),
        diagnostics,
    };
    let Some(root) = &process.control else {
        return Ok(Analysis {
            final_state: initial,
            ..an
        });
    };
    let mut sim = Sim {
        process,
        root,
        catalog,
        an,
    };
    let end = sim.run(root, initial, "");
    let mut an = sim.an;
    an.final_state = end;
    an.diagnostics.sort();
    an.diagnostics.dedup();
    Ok(an)
}
