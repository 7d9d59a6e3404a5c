//! Leveled plan graph with mutex propagation.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::domain::{ActId, Domain, PropId, ReqId};

/// Symmetric, irreflexive relation over node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MutexRel {
    adj: HashMap<u32, HashSet<u32>>,
    pairs: usize,
}

impl MutexRel {
    pub fn insert(&mut self, a: u32, b: u32) {
        if a == b {
            return;
        }
        if self.adj.entry(a).or_default().insert(b) {
            self.adj.entry(b).or_default().insert(a);
            self.pairs += 1;
        }
    }

    pub fn contains(&self, a: u32, b: u32) -> bool {
        self.adj.get(&a).is_some_and(|s| s.contains(&b))
    }

    pub fn neighbours(&self, a: u32) -> Option<&HashSet<u32>> {
        self.adj.get(&a)
    }

    pub fn is_empty(&self) -> bool {
        self.pairs == 0
    }

    pub fn len(&self) -> usize {
        self.pairs
    }
}

/// One proposition layer `P_i` and the action layer `A_i` leading to it.
#[derive(Clone, Debug)]
pub struct Level {
    pub props: Vec<bool>,
    pub prop_count: usize,
    pub prop_mutex: MutexRel,
    /// `A_i` in action order; empty at level 0.
    pub actions: Vec<ActId>,
    pub in_actions: Vec<bool>,
    /// Mutex over `A_i` plus no-ops; the no-op for `p` has node id
    /// `action_count + p`.
    pub action_mutex: MutexRel,
}

impl Level {
    pub fn has(&self, p: PropId) -> bool {
        self.props[p as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Basis {
    pub registry_version: u64,
    pub ontology_version: u64,
    pub request_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub levels: usize,
    pub prop_nodes: usize,
    pub action_nodes: usize,
    pub mutex_pairs: usize,
    pub leveled_off: bool,
    pub horizon_hit: bool,
}

#[derive(Clone, Debug)]
pub struct PlanGraph {
    domain: Arc<Domain>,
    levels: Vec<Level>,
    leveled_off: bool,
    horizon: usize,
    basis: Basis,
}

impl PlanGraph {
    /// Level 0 only: the request's initial state.
    pub fn new(domain: Arc<Domain>, horizon: usize, basis: Basis) -> Self {
        let props = domain.initial_state();
        let prop_count = props.iter().filter(|b| **b).count();
        let level0 = Level {
            props,
            prop_count,
            prop_mutex: MutexRel::default(),
            actions: Vec::new(),
            in_actions: vec![false; domain.action_count()],
            action_mutex: MutexRel::default(),
        };
        Self {
            domain,
            levels: vec![level0],
            leveled_off: false,
            horizon,
            basis,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<Domain> {
        self.domain.clone()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_leveled_off(&self) -> bool {
        self.leveled_off
    }

    /// Index of the last built level.
    pub fn last_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Level `i`; past a level-off every level equals the last one built.
    pub fn level(&self, i: usize) -> &Level {
        &self.levels[i.min(self.levels.len() - 1)]
    }

    /// Whether level `i` can be materialized without exceeding the horizon.
    pub fn can_reach(&mut self, i: usize) -> bool {
        while self.last_level() < i && !self.leveled_off {
            if self.last_level() >= self.horizon {
                return false;
            }
            self.expand_level();
        }
        true
    }

    /// Index of the first level from which all later levels are identical.
    pub fn fixpoint(&self) -> Option<usize> {
        self.leveled_off.then(|| self.levels.len() - 2)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            levels: self.levels.len(),
            prop_nodes: self.levels.iter().map(|l| l.prop_count).sum(),
            action_nodes: self.levels.iter().map(|l| l.actions.len()).sum(),
            mutex_pairs: self
                .levels
                .iter()
                .map(|l| l.prop_mutex.len() + l.action_mutex.len())
                .sum(),
            leveled_off: self.leveled_off,
            horizon_hit: !self.leveled_off && self.last_level() >= self.horizon,
        }
    }

    /// Supporters of `req` present at `level`.
    pub fn live_supporters(&self, req: ReqId, level: usize) -> Vec<PropId> {
        let l = self.level(level);
        self.domain
            .requirement(req)
            .supporters
            .iter()
            .copied()
            .filter(|&p| l.has(p))
            .collect()
    }

    /// Propositions mutex with every member of `set` at `level`.
    fn common_mutex(level: &Level, set: &[PropId]) -> HashSet<PropId> {
        let mut iter = set.iter();
        let Some(&first) = iter.next() else {
            return HashSet::new();
        };
        let mut acc: HashSet<PropId> = level.prop_mutex.neighbours(first).cloned().unwrap_or_default();
        for &p in iter {
            if acc.is_empty() {
                break;
            }
            match level.prop_mutex.neighbours(p) {
                Some(n) => acc.retain(|q| n.contains(q)),
                None => acc.clear(),
            }
        }
        acc
    }

    /// Two requirement sets that cannot hold together at `level`.
    pub fn sets_mutex(&self, level: usize, r: &[PropId], s: &[PropId]) -> bool {
        let l = self.level(level);
        if l.prop_mutex.is_empty() || r.is_empty() || s.is_empty() {
            return false;
        }
        r.iter().all(|&x| s.iter().all(|&y| x != y && l.prop_mutex.contains(x, y)))
    }

    /// Every goal is supported at `level` and no two goals are mutex.
    pub fn goals_reachable_at(&self, level: usize) -> bool {
        let sets: Vec<Vec<PropId>> = self
            .domain
            .goals()
            .iter()
            .map(|&g| self.live_supporters(g, level))
            .collect();
        if sets.iter().any(Vec::is_empty) {
            return false;
        }
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                if self.sets_mutex(level, &sets[i], &sets[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn goals_reachable(&self) -> bool {
        self.goals_reachable_at(self.last_level())
    }

    /// Expands until the goals are reachable, the graph levels off, or the
    /// horizon is hit.
    pub fn build(&mut self) {
        while !self.goals_reachable() && !self.leveled_off && self.last_level() < self.horizon {
            self.expand_level();
        }
    }

    /// Adds one level. Returns false (and changes nothing) once leveled off.
    pub fn expand_level(&mut self) -> bool {
        if self.leveled_off {
            return false;
        }
        let domain = self.domain.clone();
        let prev = self.levels.last().expect("level 0 exists");
        let n_act = domain.action_count() as u32;
        let has_pm = !prev.prop_mutex.is_empty();

        let live: Vec<Vec<PropId>> = (0..domain.requirement_count() as ReqId)
            .map(|r| {
                domain
                    .requirement(r)
                    .supporters
                    .iter()
                    .copied()
                    .filter(|&p| prev.has(p))
                    .collect()
            })
            .collect();
        let mut common: HashMap<ReqId, HashSet<PropId>> = HashMap::new();
        let mut common_of = |r: ReqId| -> HashSet<PropId> {
            common
                .entry(r)
                .or_insert_with(|| Self::common_mutex(prev, &live[r as usize]))
                .clone()
        };
        let competing = |r: ReqId, s: ReqId, common_of: &mut dyn FnMut(ReqId) -> HashSet<PropId>| {
            let m = common_of(r);
            !m.is_empty() && live[s as usize].iter().all(|p| m.contains(p))
        };

        let mut actions = Vec::new();
        let mut in_actions = vec![false; domain.action_count()];
        'acts: for a in 0..n_act {
            let act = domain.action(a);
            if act.needs.iter().any(|&r| live[r as usize].is_empty()) {
                continue;
            }
            if has_pm {
                for (i, &r) in act.needs.iter().enumerate() {
                    for &s in &act.needs[i + 1..] {
                        if competing(r, s, &mut common_of) {
                            continue 'acts;
                        }
                    }
                }
            }
            actions.push(a);
            in_actions[a as usize] = true;
        }

        let mut props = prev.props.clone();
        for &a in &actions {
            for &p in &domain.action(a).adds {
                props[p as usize] = true;
            }
        }
        let prop_count = props.iter().filter(|b| **b).count();
        let prev_props: Vec<PropId> = (0..props.len() as PropId).filter(|&p| prev.has(p)).collect();

        let mut am = MutexRel::default();
        if domain.has_conflicts() {
            for &a in &actions {
                for &b in domain.conflicts_of(a) {
                    if in_actions[b as usize] {
                        am.insert(a, b);
                    }
                }
                for &p in &domain.action(a).dels {
                    if prev.has(p) {
                        am.insert(a, n_act + p);
                    }
                }
            }
        }
        if has_pm {
            for (i, &a) in actions.iter().enumerate() {
                let needs_a = &domain.action(a).needs;
                for &b in &actions[i + 1..] {
                    if am.contains(a, b) {
                        continue;
                    }
                    let needs_b = &domain.action(b).needs;
                    if needs_a
                        .iter()
                        .any(|&r| needs_b.iter().any(|&s| competing(r, s, &mut common_of)))
                    {
                        am.insert(a, b);
                    }
                }
                for &p in &prev_props {
                    let Some(mp) = prev.prop_mutex.neighbours(p) else { continue };
                    if needs_a.iter().any(|&s| live[s as usize].iter().all(|q| mp.contains(q))) {
                        am.insert(a, n_act + p);
                    }
                }
            }
            for &p in &prev_props {
                if let Some(mp) = prev.prop_mutex.neighbours(p) {
                    for &q in mp {
                        am.insert(n_act + p, n_act + q);
                    }
                }
            }
        }

        let mut pm = MutexRel::default();
        if !am.is_empty() {
            let producers = |p: PropId| -> Vec<u32> {
                let mut v: Vec<u32> = domain
                    .producers(p)
                    .iter()
                    .copied()
                    .filter(|&a| in_actions[a as usize])
                    .collect();
                if prev.has(p) {
                    v.push(n_act + p);
                }
                v
            };
            let current: Vec<PropId> = (0..props.len() as PropId).filter(|&p| props[p as usize]).collect();
            let prods: Vec<Vec<u32>> = current.iter().map(|&p| producers(p)).collect();
            for (i, &p) in current.iter().enumerate() {
                let mut iter = prods[i].iter();
                let Some(first) = iter.next() else { continue };
                let mut acc: HashSet<u32> = am.neighbours(*first).cloned().unwrap_or_default();
                for x in iter {
                    if acc.is_empty() {
                        break;
                    }
                    match am.neighbours(*x) {
                        Some(n) => acc.retain(|y| n.contains(y)),
                        None => acc.clear(),
                    }
                }
                if acc.is_empty() {
                    continue;
                }
                for (j, &q) in current.iter().enumerate().skip(i + 1) {
                    if prods[j].iter().all(|y| acc.contains(y)) {
                        pm.insert(p, q);
                    }
                }
            }
        }

        let leveled = props == prev.props && pm == prev.prop_mutex;
        self.levels.push(Level {
            props,
            prop_count,
            prop_mutex: pm,
            actions,
            in_actions,
            action_mutex: am,
        });
        if leveled {
            self.leveled_off = true;
        }
        true
    }
}
