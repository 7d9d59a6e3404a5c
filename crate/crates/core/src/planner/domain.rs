//! Compilation of profiles and a request into an id-based planning domain.
//!
//! Every semantic test (subsumption of parameter types, status entailment)
//! is resolved here once, so expansion and extraction only compare ids.

use std::collections::HashSet;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::AbstractRequest;
use crate::error::PlanError;
use crate::ontology::{ClassRef, OntologyStore};
use crate::registry::ServiceProfile;
use crate::semantics::{entails, StatusKey};

pub type PropId = u32;
pub type ActId = u32;
pub type ReqId = u32;

/// A proposition: a value of some type is available, or a status holds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prop {
    Avail(ClassRef),
    Status(StatusKey),
}

impl std::fmt::Display for Prop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Prop::Avail(c) => write!(f, "avail({c})"),
            Prop::Status(k) => write!(f, "status({k})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Action {
    pub service: String,
    pub outcome: String,
    pub needs: Vec<ReqId>,
    pub adds: Vec<PropId>,
    pub dels: Vec<PropId>,
}

#[derive(Clone, Debug)]
pub struct Requirement {
    pub key: Prop,
    /// Universe propositions satisfying the requirement, sorted.
    pub supporters: Vec<PropId>,
}

#[derive(Clone, Debug)]
pub struct Domain {
    props: IndexSet<Prop>,
    reqs: Vec<Requirement>,
    actions: Vec<Action>,
    initial: Vec<PropId>,
    goals: Vec<ReqId>,
    producers: Vec<Vec<ActId>>,
    conflicts: Vec<HashSet<ActId>>,
    conflict_pairs: usize,
    warnings: Vec<String>,
}

struct ReqTable {
    keys: IndexSet<Prop>,
}

impl ReqTable {
    fn intern(&mut self, key: Prop) -> ReqId {
        self.keys.insert_full(key).0 as ReqId
    }
}

fn sorted_dedup(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

impl Domain {
    /// Compiles `services` (assumed sorted by id) against `request`.
    pub fn compile<'a>(
        ontology: &OntologyStore,
        services: impl IntoIterator<Item = &'a ServiceProfile>,
        request: &AbstractRequest,
    ) -> Result<Domain, PlanError> {
        let closure = ontology.closure()?;
        let mut warnings = Vec::new();
        let mut props: IndexSet<Prop> = IndexSet::new();
        let mut reqs = ReqTable { keys: IndexSet::new() };

        let mut initial = Vec::new();
        for c in &request.available_inputs {
            if ontology.resolves(c) {
                initial.push(props.insert_full(Prop::Avail(c.clone())).0 as PropId);
            } else {
                warnings.push(format!("available input '{c}' does not resolve and is ignored"));
            }
        }
        for s in &request.initial_statuses {
            if ontology.resolves(&s.class) {
                let key = StatusKey::of(s, None);
                initial.push(props.insert_full(Prop::Status(key)).0 as PropId);
            } else {
                warnings.push(format!("initial status '{}' does not resolve and is ignored", s.class));
            }
        }
        let initial = sorted_dedup(initial);

        struct Raw {
            service: String,
            outcome: String,
            needs: Vec<ReqId>,
            adds: Vec<PropId>,
            deletes: Vec<StatusKey>,
        }
        let mut raw = Vec::new();
        for profile in services {
            if !request
                .nonfunctional_filters
                .iter()
                .all(|f| f.passes(&profile.nonfunctional, ontology))
            {
                continue;
            }
            let mut needs = Vec::new();
            for input in &profile.inputs {
                needs.push(reqs.intern(Prop::Avail(input.ty.clone())));
            }
            for pre in &profile.preconditions {
                needs.push(reqs.intern(Prop::Status(StatusKey::of(pre, Some(profile)))));
            }
            let needs = sorted_dedup(needs);
            let mut outputs = Vec::new();
            for o in &profile.outputs {
                if ontology.resolves(&o.ty) {
                    outputs.push(props.insert_full(Prop::Avail(o.ty.clone())).0 as PropId);
                }
            }
            let mut effects: Vec<_> = profile.effects.iter().collect();
            effects.sort_by(|a, b| a.label.cmp(&b.label));
            for effect in effects {
                let mut adds = outputs.clone();
                for a in &effect.adds {
                    if ontology.resolves(&a.class) {
                        let key = StatusKey::of(a, Some(profile));
                        adds.push(props.insert_full(Prop::Status(key)).0 as PropId);
                    }
                }
                raw.push(Raw {
                    service: profile.id.clone(),
                    outcome: effect.label.clone(),
                    needs: needs.clone(),
                    adds: sorted_dedup(adds),
                    deletes: effect.deletes.iter().map(|d| StatusKey::of(d, Some(profile))).collect(),
                });
            }
        }

        let mut goals = Vec::new();
        for g in &request.goal_outputs {
            goals.push(reqs.intern(Prop::Avail(g.clone())));
        }
        for g in &request.goal_statuses {
            goals.push(reqs.intern(Prop::Status(StatusKey::of(g, None))));
        }
        let goals = sorted_dedup(goals);

        // Supporters: universe propositions entailing each requirement.
        let avail_ids: Vec<(PropId, Option<u32>)> = props
            .iter()
            .enumerate()
            .filter_map(|(i, p)| match p {
                Prop::Avail(c) => Some((i as PropId, ontology.class_id(c))),
                Prop::Status(_) => None,
            })
            .collect();
        let requirements: Vec<Requirement> = reqs
            .keys
            .iter()
            .map(|key| {
                let supporters = match key {
                    Prop::Avail(want) => match ontology.class_id(want) {
                        Some(w) => avail_ids
                            .iter()
                            .filter(|(_, c)| c.is_some_and(|c| closure.is_sub(c, w)))
                            .map(|(p, _)| *p)
                            .collect(),
                        None => Vec::new(),
                    },
                    Prop::Status(want) => props
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| matches!(p, Prop::Status(have) if entails(ontology, have, want)))
                        .map(|(i, _)| i as PropId)
                        .collect(),
                };
                Requirement {
                    key: key.clone(),
                    supporters,
                }
            })
            .collect();

        let actions: Vec<Action> = raw
            .into_iter()
            .map(|r| {
                let mut dels = Vec::new();
                for d in &r.deletes {
                    for (i, p) in props.iter().enumerate() {
                        if let Prop::Status(have) = p {
                            if entails(ontology, have, d) && r.adds.binary_search(&(i as PropId)).is_err() {
                                dels.push(i as PropId);
                            }
                        }
                    }
                }
                Action {
                    service: r.service,
                    outcome: r.outcome,
                    needs: r.needs,
                    adds: r.adds,
                    dels: sorted_dedup(dels),
                }
            })
            .collect();

        let mut producers = vec![Vec::new(); props.len()];
        for (a, act) in actions.iter().enumerate() {
            for &p in &act.adds {
                producers[p as usize].push(a as ActId);
            }
        }

        let mut domain = Domain {
            props,
            reqs: requirements,
            actions,
            initial,
            goals,
            producers,
            conflicts: Vec::new(),
            conflict_pairs: 0,
            warnings,
        };
        domain.compute_conflicts();
        Ok(domain)
    }

    /// Level-independent action exclusions: outcomes of one service,
    /// inconsistent effects, and interference with status supports.
    fn compute_conflicts(&mut self) {
        let n = self.actions.len();
        let mut conflicts: Vec<HashSet<ActId>> = vec![HashSet::new(); n];
        let link = |a: usize, b: usize, conflicts: &mut Vec<HashSet<ActId>>| {
            if a != b {
                conflicts[a].insert(b as ActId);
                conflicts[b].insert(a as ActId);
            }
        };
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && self.actions[end].service == self.actions[start].service {
                end += 1;
            }
            for a in start..end {
                for b in a + 1..end {
                    link(a, b, &mut conflicts);
                }
            }
            start = end;
        }
        let mut needers: Vec<Vec<ActId>> = vec![Vec::new(); self.reqs.len()];
        for (a, act) in self.actions.iter().enumerate() {
            for &r in &act.needs {
                needers[r as usize].push(a as ActId);
            }
        }
        let mut supported: Vec<Vec<ReqId>> = vec![Vec::new(); self.props.len()];
        for (r, req) in self.reqs.iter().enumerate() {
            for &p in &req.supporters {
                supported[p as usize].push(r as ReqId);
            }
        }
        for a in 0..n {
            for &p in &self.actions[a].dels {
                for &b in &self.producers[p as usize] {
                    link(a, b as usize, &mut conflicts);
                }
                for &r in &supported[p as usize] {
                    for &b in &needers[r as usize] {
                        link(a, b as usize, &mut conflicts);
                    }
                }
            }
        }
        self.conflict_pairs = conflicts.iter().map(HashSet::len).sum::<usize>() / 2;
        self.conflicts = conflicts;
    }

    pub fn prop_count(&self) -> usize {
        self.props.len()
    }

    pub fn prop(&self, id: PropId) -> &Prop {
        &self.props[id as usize]
    }

    pub fn prop_id(&self, prop: &Prop) -> Option<PropId> {
        self.props.get_index_of(prop).map(|i| i as PropId)
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn action(&self, id: ActId) -> &Action {
        &self.actions[id as usize]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action_id(&self, service: &str, outcome: &str) -> Option<ActId> {
        self.actions
            .iter()
            .position(|a| a.service == service && a.outcome == outcome)
            .map(|i| i as ActId)
    }

    pub fn requirement(&self, id: ReqId) -> &Requirement {
        &self.reqs[id as usize]
    }

    pub fn requirement_count(&self) -> usize {
        self.reqs.len()
    }

    pub fn requirement_id(&self, key: &Prop) -> Option<ReqId> {
        self.reqs.iter().position(|r| &r.key == key).map(|i| i as ReqId)
    }

    pub fn initial(&self) -> &[PropId] {
        &self.initial
    }

    pub fn goals(&self) -> &[ReqId] {
        &self.goals
    }

    pub fn producers(&self, prop: PropId) -> &[ActId] {
        &self.producers[prop as usize]
    }

    pub fn conflict(&self, a: ActId, b: ActId) -> bool {
        self.conflicts[a as usize].contains(&b)
    }

    pub fn conflicts_of(&self, a: ActId) -> &HashSet<ActId> {
        &self.conflicts[a as usize]
    }

    pub fn has_conflicts(&self) -> bool {
        self.conflict_pairs > 0
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn initial_state(&self) -> Vec<bool> {
        let mut s = vec![false; self.props.len()];
        for &p in &self.initial {
            s[p as usize] = true;
        }
        s
    }

    pub fn holds(&self, req: ReqId, state: &[bool]) -> bool {
        self.reqs[req as usize].supporters.iter().any(|&p| state[p as usize])
    }

    pub fn applicable(&self, a: ActId, state: &[bool]) -> bool {
        self.actions[a as usize].needs.iter().all(|&r| self.holds(r, state))
    }

    /// Applies one layer, or `None` if some action is inapplicable or two
    /// actions conflict.
    pub fn step(&self, state: &[bool], layer: &[ActId]) -> Option<Vec<bool>> {
        for (i, &a) in layer.iter().enumerate() {
            if !self.applicable(a, state) || layer[i + 1..].iter().any(|&b| b == a || self.conflict(a, b)) {
                return None;
            }
        }
        let mut next = state.to_vec();
        for &a in layer {
            for &p in &self.actions[a as usize].dels {
                next[p as usize] = false;
            }
        }
        for &a in layer {
            for &p in &self.actions[a as usize].adds {
                next[p as usize] = true;
            }
        }
        Some(next)
    }

    pub fn simulate(&self, layers: &[Vec<ActId>]) -> Option<Vec<bool>> {
        let mut state = self.initial_state();
        for layer in layers {
            state = self.step(&state, layer)?;
        }
        Some(state)
    }

    pub fn achieves_goals(&self, layers: &[Vec<ActId>]) -> bool {
        self.simulate(layers)
            .is_some_and(|s| self.goals.iter().all(|&g| self.holds(g, &s)))
    }

    /// No single action can be dropped with the plan staying valid.
    pub fn removal_minimal(&self, layers: &[Vec<ActId>]) -> bool {
        for (li, layer) in layers.iter().enumerate() {
            for skip in 0..layer.len() {
                let mut reduced = layers.to_vec();
                reduced[li].remove(skip);
                if self.achieves_goals(&reduced) {
                    return false;
                }
            }
        }
        true
    }
}
