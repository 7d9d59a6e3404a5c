//! Lazy backward plan extraction.
//!
//! A requirement is a set of acceptable propositions (any one of them will
//! do). Regressing a layer keeps requirements the layer does not cover,
//! minus what it deletes, and adds every member's needs. Because the
//! regression is exact, every leaf that reaches level 0 is a valid plan.
//!
//! The search state lives in a serializable [`Cursor`], so enumeration can
//! stop after any plan and resume later without repeating work.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::domain::{ActId, PropId};
use super::graph::PlanGraph;

type ReqSet = Vec<Vec<PropId>>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    /// Only plans of the smallest layer count.
    #[default]
    MinimalLevel,
    /// Continue with longer plans until the graph levels off.
    ThroughLevelOff,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Frame {
    level: usize,
    reqs: ReqSet,
    cands: Vec<ActId>,
    /// For each candidate, the indices of the requirements it covers.
    covers: Vec<Vec<u32>>,
    sel: Vec<usize>,
    next: usize,
    found: bool,
}

impl Frame {
    fn new(graph: &PlanGraph, level: usize, reqs: ReqSet) -> Self {
        let domain = graph.domain();
        let l = graph.level(level);
        let mut cands: Vec<ActId> = reqs
            .iter()
            .flatten()
            .flat_map(|&p| domain.producers(p).iter().copied())
            .filter(|&a| l.in_actions[a as usize])
            .collect();
        cands.sort_unstable();
        cands.dedup();
        let covers = cands
            .iter()
            .map(|&a| {
                let adds = &domain.action(a).adds;
                reqs.iter()
                    .enumerate()
                    .filter(|(_, r)| intersects(adds, r))
                    .map(|(i, _)| i as u32)
                    .collect()
            })
            .collect();
        Frame {
            level,
            reqs,
            cands,
            covers,
            sel: Vec::new(),
            next: 0,
            found: false,
        }
    }

    fn members(&self) -> Vec<ActId> {
        self.sel.iter().map(|&i| self.cands[i]).collect()
    }

    /// Whether `c` can join the current selection: no mutex with a member,
    /// and every member still covers some requirement no other member does.
    fn admits(&self, graph: &PlanGraph, c: usize) -> bool {
        let mutex = &graph.level(self.level).action_mutex;
        let a = self.cands[c];
        if self.sel.iter().any(|&m| mutex.contains(self.cands[m], a)) {
            return false;
        }
        let mut count = vec![0u32; self.reqs.len()];
        for &m in self.sel.iter().chain(std::iter::once(&c)) {
            for &r in &self.covers[m] {
                count[r as usize] += 1;
            }
        }
        self.sel
            .iter()
            .chain(std::iter::once(&c))
            .all(|&m| self.covers[m].iter().any(|&r| count[r as usize] == 1))
    }

    /// Moves to the next admissible subset in preorder; false when exhausted.
    fn advance(&mut self, graph: &PlanGraph) -> bool {
        loop {
            if self.next < self.cands.len() && self.sel.len() < self.reqs.len() {
                let c = self.next;
                self.next += 1;
                if self.admits(graph, c) {
                    self.sel.push(c);
                    return true;
                }
            } else {
                match self.sel.pop() {
                    Some(last) => self.next = last + 1,
                    None => return false,
                }
            }
        }
    }
}

fn intersects(a: &[PropId], b: &[PropId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

fn is_subset(small: &[PropId], big: &[PropId]) -> bool {
    small.iter().all(|p| big.binary_search(p).is_ok())
}

/// Sorts, deduplicates and drops requirements implied by a smaller one.
fn normalize(mut reqs: ReqSet) -> ReqSet {
    reqs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    reqs.dedup();
    let mut kept: ReqSet = Vec::with_capacity(reqs.len());
    for r in reqs {
        if !kept.iter().any(|s| is_subset(s, &r)) {
            kept.push(r);
        }
    }
    kept.sort();
    kept
}

/// Requirements at `level` for `goals`, or `None` if some goal is unsupported
/// or two goals are mutex there.
fn root_reqs(graph: &PlanGraph, level: usize) -> Option<ReqSet> {
    let reqs: ReqSet = graph
        .domain()
        .goals()
        .iter()
        .map(|&g| graph.live_supporters(g, level))
        .collect();
    check(graph, level, normalize(reqs))
}

fn check(graph: &PlanGraph, level: usize, reqs: ReqSet) -> Option<ReqSet> {
    if reqs.iter().any(Vec::is_empty) {
        return None;
    }
    if !graph.level(level).prop_mutex.is_empty() {
        for i in 0..reqs.len() {
            for j in i + 1..reqs.len() {
                if graph.sets_mutex(level, &reqs[i], &reqs[j]) {
                    return None;
                }
            }
        }
    }
    Some(reqs)
}

/// Requirements at `level - 1` under which layer `members` at `level`
/// achieves `reqs`.
fn regress(graph: &PlanGraph, level: usize, reqs: &ReqSet, members: &[ActId]) -> Option<ReqSet> {
    let domain = graph.domain();
    let prev = graph.level(level - 1);
    let dels: HashSet<PropId> = members
        .iter()
        .flat_map(|&m| domain.action(m).dels.iter().copied())
        .collect();
    let mut out = Vec::new();
    for r in reqs {
        let covered = members.iter().any(|&m| intersects(&domain.action(m).adds, r));
        if !covered {
            let kept: Vec<PropId> = r
                .iter()
                .copied()
                .filter(|p| !dels.contains(p) && prev.has(*p))
                .collect();
            if kept.is_empty() {
                return None;
            }
            out.push(kept);
        }
    }
    for &m in members {
        for &n in &domain.action(m).needs {
            out.push(graph.live_supporters(n, level - 1));
        }
    }
    check(graph, level - 1, normalize(out))
}

/// Resumable extraction state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub mode: ExtractMode,
    stage: usize,
    stage_open: bool,
    frames: Vec<Frame>,
    nogoods: BTreeMap<usize, BTreeSet<ReqSet>>,
    emitted: usize,
    emitted_in_stage: usize,
    first_plan_level: Option<usize>,
    fixpoint_memo: Option<usize>,
    done: bool,
    /// Search steps left before extraction pauses; `None` is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<u64>,
}

impl Cursor {
    pub fn new(mode: ExtractMode) -> Self {
        Self {
            mode,
            stage: 0,
            stage_open: false,
            frames: Vec::new(),
            nogoods: BTreeMap::new(),
            emitted: 0,
            emitted_in_stage: 0,
            first_plan_level: None,
            fixpoint_memo: None,
            done: false,
            budget: None,
        }
    }

    /// A cursor that pauses after `steps` search steps. A paused cursor is
    /// not done; a fresh budget resumes it.
    pub fn with_budget(mode: ExtractMode, steps: u64) -> Self {
        Self {
            budget: Some(steps),
            ..Self::new(mode)
        }
    }

    pub fn set_budget(&mut self, steps: Option<u64>) {
        self.budget = steps;
    }

    pub fn budget_exhausted(&self) -> bool {
        self.budget == Some(0)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Plans returned so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn nogood_count(&self) -> usize {
        self.nogoods.values().map(BTreeSet::len).sum()
    }

    fn is_nogood(&self, level: usize, reqs: &ReqSet) -> bool {
        self.nogoods.get(&level).is_some_and(|s| s.contains(reqs))
    }

    fn finish_stage(&mut self, graph: &PlanGraph) {
        self.stage_open = false;
        self.frames.clear();
        if self.emitted_in_stage > 0 && self.first_plan_level.is_none() {
            self.first_plan_level = Some(self.stage);
        }
        self.emitted_in_stage = 0;
        if self.first_plan_level.is_some() {
            let past_fixpoint = graph.fixpoint().is_some_and(|f| self.stage >= f);
            if self.mode == ExtractMode::MinimalLevel || past_fixpoint || self.stage >= graph.horizon() {
                self.done = true;
            }
        } else if let Some(f) = graph.fixpoint() {
            if self.stage > f {
                let size = self.nogoods.get(&f).map_or(0, BTreeSet::len);
                if self.fixpoint_memo == Some(size) {
                    self.done = true;
                }
                self.fixpoint_memo = Some(size);
            }
        }
        self.stage += 1;
    }

    /// Starts the current stage. May produce the empty plan at level 0.
    fn open_stage(&mut self, graph: &mut PlanGraph) -> Option<Vec<Vec<ActId>>> {
        let s = self.stage;
        if s > graph.horizon() || !graph.can_reach(s) {
            self.done = true;
            return None;
        }
        if let Some(f) = graph.fixpoint() {
            if !graph.goals_reachable_at(f) {
                self.done = true;
                return None;
            }
        }
        if !graph.goals_reachable_at(s) {
            self.stage += 1;
            return None;
        }
        let Some(reqs) = root_reqs(graph, s) else {
            self.stage += 1;
            return None;
        };
        if s == 0 {
            self.emitted += 1;
            self.emitted_in_stage += 1;
            self.finish_stage(graph);
            return Some(Vec::new());
        }
        if self.is_nogood(s, &reqs) {
            self.finish_stage(graph);
            return None;
        }
        self.frames.push(Frame::new(graph, s, reqs));
        self.stage_open = true;
        None
    }

    /// The next plan, as action ids per layer.
    pub fn next_plan(&mut self, graph: &mut PlanGraph) -> Option<Vec<Vec<ActId>>> {
        if self.stage_open {
            graph.can_reach(self.stage);
        }
        loop {
            if self.done || self.budget_exhausted() {
                return None;
            }
            if let Some(b) = self.budget.as_mut() {
                *b -= 1;
            }
            if !self.stage_open {
                if let Some(plan) = self.open_stage(graph) {
                    return Some(plan);
                }
                continue;
            }
            let Some(top) = self.frames.last_mut() else {
                self.finish_stage(graph);
                continue;
            };
            if !top.advance(graph) {
                let frame = self.frames.pop().expect("non-empty");
                if !frame.found {
                    self.nogoods.entry(frame.level).or_default().insert(frame.reqs);
                }
                match self.frames.last_mut() {
                    Some(parent) => parent.found |= frame.found,
                    None => self.finish_stage(graph),
                }
                continue;
            }
            let level = top.level;
            let members = top.members();
            let Some(reqs) = regress(graph, level, &top.reqs, &members) else {
                continue;
            };
            if level == 1 {
                top.found = true;
                let mut layers = vec![Vec::new(); self.stage];
                for f in &self.frames {
                    layers[f.level - 1] = f.members();
                }
                debug_assert!(graph.domain().achieves_goals(&layers));
                if graph.domain().removal_minimal(&layers) {
                    self.emitted += 1;
                    self.emitted_in_stage += 1;
                    return Some(layers);
                }
                continue;
            }
            if self.is_nogood(level - 1, &reqs) {
                continue;
            }
            let frame = Frame::new(graph, level - 1, reqs);
            self.frames.push(frame);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_drops_implied_requirements() {
        let reqs = vec![vec![1, 2, 3], vec![2], vec![2], vec![4, 5]];
        assert_eq!(normalize(reqs), vec![vec![2], vec![4, 5]]);
    }

    #[test]
    fn budget_pauses_without_finishing() {
        let c = Cursor::with_budget(ExtractMode::MinimalLevel, 0);
        assert!(c.budget_exhausted() && !c.is_done());
        let mut c = c;
        c.set_budget(None);
        assert!(!c.budget_exhausted());
    }

    #[test]
    fn sorted_intersection() {
        assert!(intersects(&[1, 4, 9], &[2, 9]));
        assert!(!intersects(&[1, 4], &[2, 3, 5]));
        assert!(!intersects(&[], &[1]));
    }
}
