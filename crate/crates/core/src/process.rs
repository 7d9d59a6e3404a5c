//! Composite process model: steps, control constructs and dataflow
//! consolidations, plus invertible edit deltas.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AssistError;
use crate::registry::Registry;

pub type StepId = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    User,
    SuggestedAccepted,
    AutoCompleted,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub service: String,
    /// Assumed outcome; `None` leaves it open.
    #[serde(default)]
    pub outcome: Option<String>,
    pub provenance: Provenance,
}

impl Step {
    pub fn user(service: impl Into<String>) -> Self {
        Self {
            service: service.into(),
            outcome: None,
            provenance: Provenance::User,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construct {
    Step(StepId),
    Sequence(Vec<Construct>),
    Parallel(Vec<Construct>),
    Choice(Vec<Construct>),
}

impl Construct {
    pub fn step(id: &str) -> Self {
        Construct::Step(id.to_string())
    }

    pub fn children(&self) -> &[Construct] {
        match self {
            Construct::Step(_) => &[],
            Construct::Sequence(c) | Construct::Parallel(c) | Construct::Choice(c) => c,
        }
    }

    /// Step ids in left-to-right order.
    pub fn leaves(&self) -> Vec<&StepId> {
        let mut out = Vec::new();
        fn walk<'a>(c: &'a Construct, out: &mut Vec<&'a StepId>) {
            match c {
                Construct::Step(id) => out.push(id),
                _ => c.children().iter().for_each(|c| walk(c, out)),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Child indices leading from `self` to the leaf `id`.
    pub fn path_to(&self, id: &str) -> Option<Vec<usize>> {
        match self {
            Construct::Step(s) => (s == id).then(Vec::new),
            _ => self.children().iter().enumerate().find_map(|(i, c)| {
                c.path_to(id).map(|mut p| {
                    p.insert(0, i);
                    p
                })
            }),
        }
    }

    pub fn at(&self, path: &[usize]) -> &Construct {
        path.iter().fold(self, |c, &i| &c.children()[i])
    }

    fn children_mut(&mut self) -> Option<&mut Vec<Construct>> {
        match self {
            Construct::Step(_) => None,
            Construct::Sequence(c) | Construct::Parallel(c) | Construct::Choice(c) => Some(c),
        }
    }

    fn at_mut(&mut self, path: &[usize]) -> &mut Construct {
        let mut c = self;
        for &i in path {
            c = &mut c.children_mut().expect("path goes through constructs")[i];
        }
        c
    }

    /// Collapses single-child constructs, drops empty ones and flattens
    /// directly nested constructs of the same kind.
    pub fn normalized(self) -> Option<Construct> {
        fn rebuild(kind: &Construct, children: Vec<Construct>) -> Option<Construct> {
            let mut flat = Vec::new();
            for child in children.into_iter().filter_map(Construct::normalized) {
                match (kind, child) {
                    (Construct::Sequence(_), Construct::Sequence(inner))
                    | (Construct::Parallel(_), Construct::Parallel(inner)) => flat.extend(inner),
                    (_, child) => flat.push(child),
                }
            }
            match flat.len() {
                0 => None,
                1 if !matches!(kind, Construct::Choice(_)) => flat.pop(),
                _ => Some(match kind {
                    Construct::Sequence(_) => Construct::Sequence(flat),
                    Construct::Parallel(_) => Construct::Parallel(flat),
                    _ => Construct::Choice(flat),
                }),
            }
        }
        match self {
            Construct::Step(_) => Some(self),
            Construct::Sequence(ref c) | Construct::Parallel(ref c) | Construct::Choice(ref c) => {
                let children = c.clone();
                rebuild(&self, children)
            }
        }
    }

    /// The lowest common ancestor path of two leaves, with the child indices
    /// taken below it on each side.
    pub fn split(&self, a: &str, b: &str) -> Option<(Vec<usize>, usize, usize)> {
        let pa = self.path_to(a)?;
        let pb = self.path_to(b)?;
        let common = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
        if common == pa.len() || common == pb.len() {
            return None;
        }
        Some((pa[..common].to_vec(), pa[common], pb[common]))
    }

    /// `a` is guaranteed to complete before `b` starts.
    pub fn precedes(&self, a: &str, b: &str) -> bool {
        match self.split(a, b) {
            Some((lca, ia, ib)) => matches!(self.at(&lca), Construct::Sequence(_)) && ia < ib,
            None => false,
        }
    }

    /// `a` and `b` may overlap in time.
    pub fn concurrent(&self, a: &str, b: &str) -> bool {
        matches!(self.split(a, b), Some((lca, _, _)) if matches!(self.at(&lca), Construct::Parallel(_)))
    }

    /// `a` and `b` lie on different branches of a choice.
    pub fn exclusive(&self, a: &str, b: &str) -> bool {
        matches!(self.split(a, b), Some((lca, _, _)) if matches!(self.at(&lca), Construct::Choice(_)))
    }

    /// A copy with the node at `path` replaced by `f` of it, normalized.
    pub fn replaced_at(&self, path: &[usize], f: impl FnOnce(&Construct) -> Construct) -> Option<Construct> {
        let mut out = self.clone();
        let slot = out.at_mut(path);
        *slot = f(slot);
        out.normalized()
    }

    /// The kind of construct directly holding leaf `id`, if any.
    pub fn parent_of(&self, id: &str) -> Option<(&Construct, usize)> {
        let path = self.path_to(id)?;
        let (last, parent) = path.split_last()?;
        Some((self.at(parent), *last))
    }
}

/// Where to put a new step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    End,
    After(StepId),
    Before(StepId),
    ParallelWith(StepId),
}

/// Returns `control` with leaf `id` placed as requested.
pub fn place(control: Option<&Construct>, id: &str, placement: &Placement) -> Result<Construct, AssistError> {
    let leaf = Construct::step(id);
    let Some(control) = control else {
        return match placement {
            Placement::End => Ok(leaf),
            Placement::After(s) | Placement::Before(s) | Placement::ParallelWith(s) => {
                Err(AssistError::UnknownStep(s.clone()))
            }
        };
    };
    let (anchor, wrap): (&StepId, fn(Construct, Construct) -> Construct) = match placement {
        Placement::End => {
            let c = Construct::Sequence(vec![control.clone(), leaf]);
            return Ok(c.normalized().expect("non-empty"));
        }
        Placement::After(s) => (s, |old, new| Construct::Sequence(vec![old, new])),
        Placement::Before(s) => (s, |old, new| Construct::Sequence(vec![new, old])),
        Placement::ParallelWith(s) => (s, |old, new| Construct::Parallel(vec![old, new])),
    };
    let path = control
        .path_to(anchor)
        .ok_or_else(|| AssistError::UnknownStep(anchor.clone()))?;
    let mut out = control.clone();
    let slot = out.at_mut(&path);
    let old = std::mem::replace(slot, Construct::step(""));
    *slot = wrap(old, leaf);
    Ok(out.normalized().expect("non-empty"))
}

/// Returns `control` without leaf `id`.
pub fn unplace(control: &Construct, id: &str) -> Option<Construct> {
    fn strip(c: &Construct, id: &str) -> Option<Construct> {
        match c {
            Construct::Step(s) if s == id => None,
            Construct::Step(_) => Some(c.clone()),
            Construct::Sequence(ch) => Some(Construct::Sequence(ch.iter().filter_map(|c| strip(c, id)).collect())),
            Construct::Parallel(ch) => Some(Construct::Parallel(ch.iter().filter_map(|c| strip(c, id)).collect())),
            Construct::Choice(ch) => Some(Construct::Choice(ch.iter().filter_map(|c| strip(c, id)).collect())),
        }
    }
    strip(control, id).and_then(Construct::normalized)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Consolidation {
    pub producer: StepId,
    pub output: String,
    pub consumer: StepId,
    pub input: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidationEntry {
    #[serde(flatten)]
    pub link: Consolidation,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeProcess {
    #[serde(default)]
    pub steps: BTreeMap<StepId, Step>,
    #[serde(default)]
    pub control: Option<Construct>,
    /// Sorted by (consumer, input); at most one per consumer input.
    #[serde(default)]
    pub consolidations: Vec<ConsolidationEntry>,
}

impl CompositeProcess {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Canonical JSON: maps are ordered and consolidations sorted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("process serializes")
    }

    pub fn content_hash(&self) -> String {
        crate::planner::hex(&Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn feeding(&self, consumer: &str, input: &str) -> Option<&ConsolidationEntry> {
        self.consolidations
            .iter()
            .find(|c| c.link.consumer == consumer && c.link.input == input)
    }

    /// A step id based on `service` not used yet.
    pub fn fresh_step_id(&self, service: &str) -> StepId {
        if !self.steps.contains_key(service) {
            return service.to_string();
        }
        (2..)
            .map(|n| format!("{service}-{n}"))
            .find(|id| !self.steps.contains_key(id))
            .expect("unbounded")
    }

    /// Structural invariants; parameter names are checked for steps whose
    /// service is still registered.
    pub fn validate(&self, registry: Option<&Registry>) -> Result<(), AssistError> {
        let invalid = |m: String| Err(AssistError::InvalidProcess(m));
        let leaves: Vec<&StepId> = self.control.as_ref().map(Construct::leaves).unwrap_or_default();
        let mut seen = BTreeSet::new();
        for id in &leaves {
            if !self.steps.contains_key(*id) {
                return invalid(format!("control refers to unknown step '{id}'"));
            }
            if !seen.insert(*id) {
                return invalid(format!("step '{id}' appears more than once in the control tree"));
            }
        }
        if let Some(missing) = self.steps.keys().find(|id| !seen.contains(id)) {
            return invalid(format!("step '{missing}' is not placed in the control tree"));
        }
        let mut inputs = BTreeSet::new();
        for c in &self.consolidations {
            let l = &c.link;
            if l.producer == l.consumer {
                return invalid(format!("step '{}' is consolidated with itself", l.producer));
            }
            for (step, param, side) in [(&l.producer, &l.output, "output"), (&l.consumer, &l.input, "input")] {
                let Some(s) = self.steps.get(step) else {
                    return invalid(format!("consolidation refers to unknown step '{step}'"));
                };
                if let Some(profile) = registry.and_then(|r| r.get(&s.service)) {
                    let params = if side == "output" { &profile.outputs } else { &profile.inputs };
                    if !params.iter().any(|p| &p.name == param) {
                        return invalid(format!("step '{step}' has no {side} '{param}'"));
                    }
                }
            }
            if !inputs.insert((&l.consumer, &l.input)) {
                return invalid(format!("input '{}.{}' is fed more than once", l.consumer, l.input));
            }
        }
        Ok(())
    }

    fn sort_consolidations(&mut self) {
        self.consolidations
            .sort_by(|a, b| (&a.link.consumer, &a.link.input).cmp(&(&b.link.consumer, &b.link.input)));
    }

    fn apply_op(&mut self, op: &EditOp) -> Result<(), AssistError> {
        let invalid = |m: String| Err(AssistError::InvalidProcess(m));
        match op {
            EditOp::AddStep { id, step } => {
                if self.steps.contains_key(id) {
                    return invalid(format!("step '{id}' already exists"));
                }
                self.steps.insert(id.clone(), step.clone());
            }
            EditOp::RemoveStep { id, step } => match self.steps.get(id) {
                Some(s) if s == step => {
                    self.steps.remove(id);
                }
                Some(_) => return invalid(format!("step '{id}' differs from the one to remove")),
                None => return Err(AssistError::UnknownStep(id.clone())),
            },
            EditOp::SetOutcome { id, from, to } => match self.steps.get_mut(id) {
                Some(s) if &s.outcome == from => s.outcome = to.clone(),
                Some(_) => return invalid(format!("outcome of '{id}' changed")),
                None => return Err(AssistError::UnknownStep(id.clone())),
            },
            EditOp::AddConsolidation(entry) => {
                if self.feeding(&entry.link.consumer, &entry.link.input).is_some() {
                    return invalid(format!(
                        "input '{}.{}' is already consolidated",
                        entry.link.consumer, entry.link.input
                    ));
                }
                self.consolidations.push(entry.clone());
                self.sort_consolidations();
            }
            EditOp::RemoveConsolidation(entry) => {
                let Some(pos) = self.consolidations.iter().position(|c| c == entry) else {
                    return invalid(format!(
                        "no consolidation {}.{} -> {}.{}",
                        entry.link.producer, entry.link.output, entry.link.consumer, entry.link.input
                    ));
                };
                self.consolidations.remove(pos);
            }
            EditOp::ReplaceControl { from, to } => {
                if &self.control != from {
                    return invalid("control tree changed".into());
                }
                self.control = to.clone();
            }
        }
        Ok(())
    }

    /// Applies all ops, then checks invariants. All or nothing.
    pub fn apply(&mut self, delta: &Delta, registry: Option<&Registry>) -> Result<(), AssistError> {
        let mut next = self.clone();
        for op in &delta.ops {
            next.apply_op(op)?;
        }
        next.validate(registry)?;
        *self = next;
        Ok(())
    }

    /// Delta appending a new step for `service` at `placement`.
    pub fn insert_step_delta(&self, id: &str, step: Step, placement: &Placement) -> Result<Delta, AssistError> {
        let to = place(self.control.as_ref(), id, placement)?;
        Ok(Delta {
            ops: vec![
                EditOp::AddStep {
                    id: id.to_string(),
                    step,
                },
                EditOp::ReplaceControl {
                    from: self.control.clone(),
                    to: Some(to),
                },
            ],
        })
    }

    /// Delta removing a step together with its consolidations.
    /// A delta turning `self` into `next`.
    pub fn replacement_delta(&self, next: &CompositeProcess) -> Delta {
        let mut ops: Vec<EditOp> = self
            .consolidations
            .iter()
            .map(|c| EditOp::RemoveConsolidation(c.clone()))
            .collect();
        ops.extend(self.steps.iter().map(|(id, step)| EditOp::RemoveStep {
            id: id.clone(),
            step: step.clone(),
        }));
        ops.push(EditOp::ReplaceControl {
            from: self.control.clone(),
            to: next.control.clone(),
        });
        ops.extend(next.steps.iter().map(|(id, step)| EditOp::AddStep {
            id: id.clone(),
            step: step.clone(),
        }));
        ops.extend(next.consolidations.iter().cloned().map(EditOp::AddConsolidation));
        Delta { ops }
    }

    pub fn remove_step_delta(&self, id: &str) -> Result<Delta, AssistError> {
        let step = self
            .steps
            .get(id)
            .ok_or_else(|| AssistError::UnknownStep(id.to_string()))?;
        let mut ops: Vec<EditOp> = self
            .consolidations
            .iter()
            .filter(|c| c.link.producer == id || c.link.consumer == id)
            .map(|c| EditOp::RemoveConsolidation(c.clone()))
            .collect();
        ops.push(EditOp::ReplaceControl {
            from: self.control.clone(),
            to: self.control.as_ref().and_then(|c| unplace(c, id)),
        });
        ops.push(EditOp::RemoveStep {
            id: id.to_string(),
            step: step.clone(),
        });
        Ok(Delta { ops })
    }
}

/// One invertible edit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op")]
pub enum EditOp {
    AddStep { id: StepId, step: Step },
    RemoveStep { id: StepId, step: Step },
    SetOutcome { id: StepId, from: Option<String>, to: Option<String> },
    AddConsolidation(ConsolidationEntry),
    RemoveConsolidation(ConsolidationEntry),
    ReplaceControl { from: Option<Construct>, to: Option<Construct> },
}

impl EditOp {
    pub fn inverse(&self) -> EditOp {
        match self {
            EditOp::AddStep { id, step } => EditOp::RemoveStep {
                id: id.clone(),
                step: step.clone(),
            },
            EditOp::RemoveStep { id, step } => EditOp::AddStep {
                id: id.clone(),
                step: step.clone(),
            },
            EditOp::SetOutcome { id, from, to } => EditOp::SetOutcome {
                id: id.clone(),
                from: to.clone(),
                to: from.clone(),
            },
            EditOp::AddConsolidation(c) => EditOp::RemoveConsolidation(c.clone()),
            EditOp::RemoveConsolidation(c) => EditOp::AddConsolidation(c.clone()),
            EditOp::ReplaceControl { from, to } => EditOp::ReplaceControl {
                from: to.clone(),
                to: from.clone(),
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub ops: Vec<EditOp>,
}

impl Delta {
    pub fn inverse(&self) -> Delta {
        Delta {
            ops: self.ops.iter().rev().map(EditOp::inverse).collect(),
        }
    }

    pub fn then(mut self, other: Delta) -> Delta {
        self.ops.extend(other.ops);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ids: &[&str]) -> Construct {
        Construct::Sequence(ids.iter().map(|s| Construct::step(s)).collect())
    }

    fn process(ids: &[&str]) -> CompositeProcess {
        let mut p = CompositeProcess::default();
        for id in ids {
            let d = p.insert_step_delta(id, Step::user(*id), &Placement::End).unwrap();
            p.apply(&d, None).unwrap();
        }
        p
    }

    #[test]
    fn placement_builds_sequences_and_parallels() {
        let p = process(&["a", "b"]);
        assert_eq!(p.control, Some(seq(&["a", "b"])));
        let c = place(p.control.as_ref(), "x", &Placement::ParallelWith("b".into())).unwrap();
        assert_eq!(
            c,
            Construct::Sequence(vec![
                Construct::step("a"),
                Construct::Parallel(vec![Construct::step("b"), Construct::step("x")])
            ])
        );
        let c = place(p.control.as_ref(), "x", &Placement::Before("b".into())).unwrap();
        assert_eq!(c, seq(&["a", "x", "b"]));
        assert!(place(p.control.as_ref(), "x", &Placement::After("nope".into())).is_err());
    }

    #[test]
    fn order_relations() {
        let c = Construct::Sequence(vec![
            Construct::step("a"),
            Construct::Parallel(vec![Construct::step("b"), Construct::step("c")]),
            Construct::Choice(vec![Construct::step("d"), Construct::step("e")]),
        ]);
        assert!(c.precedes("a", "b"));
        assert!(!c.precedes("b", "a"));
        assert!(c.concurrent("b", "c"));
        assert!(!c.precedes("b", "c"));
        assert!(c.exclusive("d", "e"));
        assert!(c.precedes("c", "e"));
    }

    #[test]
    fn delta_inverse_restores() {
        let mut p = process(&["a", "b"]);
        let before = p.clone();
        let link = ConsolidationEntry {
            link: Consolidation {
                producer: "a".into(),
                output: "o".into(),
                consumer: "b".into(),
                input: "i".into(),
            },
            provenance: Provenance::User,
        };
        let add = Delta {
            ops: vec![EditOp::AddConsolidation(link)],
        };
        p.apply(&add, None).unwrap();
        let remove = p.remove_step_delta("a").unwrap();
        p.apply(&remove, None).unwrap();
        assert_eq!(p.steps.len(), 1);
        assert!(p.consolidations.is_empty());
        p.apply(&remove.inverse(), None).unwrap();
        p.apply(&add.inverse(), None).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn failed_delta_changes_nothing() {
        let mut p = process(&["a"]);
        let before = p.clone();
        let bad = Delta {
            ops: vec![
                EditOp::AddStep {
                    id: "b".into(),
                    step: Step::user("b"),
                },
            ],
        };
        assert!(p.apply(&bad, None).is_err());
        assert_eq!(p, before);
    }

    #[test]
    fn double_feed_is_rejected() {
        let mut p = process(&["a", "b", "c"]);
        let link = |producer: &str| {
            EditOp::AddConsolidation(ConsolidationEntry {
                link: Consolidation {
                    producer: producer.into(),
                    output: "o".into(),
                    consumer: "c".into(),
                    input: "i".into(),
                },
                provenance: Provenance::User,
            })
        };
        p.apply(&Delta { ops: vec![link("a")] }, None).unwrap();
        assert!(p.apply(&Delta { ops: vec![link("b")] }, None).is_err());
    }

    #[test]
    fn canonical_hash_is_stable() {
        let p = process(&["a", "b"]);
        let q: CompositeProcess = serde_json::from_str(&p.canonical_json()).unwrap();
        assert_eq!(p.content_hash(), q.content_hash());
        assert_ne!(p.content_hash(), process(&["b", "a"]).content_hash());
        assert_eq!(p.fresh_step_id("a"), "a-2");
    }

    #[test]
    fn unplace_collapses() {
        let c = Construct::Sequence(vec![
            Construct::step("a"),
            Construct::Parallel(vec![Construct::step("b"), Construct::step("c")]),
        ]);
        assert_eq!(unplace(&c, "c"), Some(seq(&["a", "b"])));
        assert_eq!(unplace(&Construct::step("a"), "a"), None);
    }
}
