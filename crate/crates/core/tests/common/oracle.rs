//! Reference semantics written directly against profiles and the ontology's
//! subsumption test. Nothing here goes through the planner.

use std::collections::{BTreeMap, BTreeSet};

use semcompose::ontology::{ClassRef, OntologyStore};
use semcompose::planner::{AbstractRequest, Plan};
use semcompose::registry::{Binding, Registry, ServiceProfile, StatusPattern};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Val {
    Ty(String),
    Lit(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Fact {
    Avail(String),
    Status(String, BTreeMap<String, Val>),
}

fn sig(p: &StatusPattern, owner: Option<&ServiceProfile>) -> BTreeMap<String, Val> {
    p.bindings
        .iter()
        .map(|(k, b)| {
            let v = match b {
                Binding::Param(n) => Val::Ty(
                    owner
                        .and_then(|o| o.inputs.iter().chain(&o.outputs).find(|q| &q.name == n))
                        .map(|q| q.ty.as_str().to_string())
                        .unwrap_or_else(|| n.clone()),
                ),
                Binding::Type(c) => Val::Ty(c.as_str().to_string()),
                Binding::Literal(l) => Val::Lit(l.clone()),
            };
            (k.clone(), v)
        })
        .collect()
}

fn status_fact(p: &StatusPattern, owner: Option<&ServiceProfile>) -> Fact {
    Fact::Status(p.class.as_str().to_string(), sig(p, owner))
}

fn below(o: &OntologyStore, specific: &str, general: &str) -> bool {
    o.subsumes(&ClassRef::new(general), &ClassRef::new(specific)).unwrap_or(false)
}

/// Whether `have` satisfies the requirement `want`.
pub fn satisfies(o: &OntologyStore, have: &Fact, want: &Fact) -> bool {
    match (have, want) {
        (Fact::Avail(h), Fact::Avail(w)) => below(o, h, w),
        (Fact::Status(hc, hs), Fact::Status(wc, ws)) => {
            below(o, hc, wc)
                && ws.iter().all(|(wp, wv)| {
                    hs.iter().any(|(hp, hv)| {
                        let prop_ok = hp == wp || o.subproperty(wp, hp).unwrap_or(false);
                        let val_ok = match (hv, wv) {
                            (Val::Ty(a), Val::Ty(b)) => below(o, a, b),
                            (Val::Lit(a), Val::Lit(b)) => a == b,
                            _ => false,
                        };
                        prop_ok && val_ok
                    })
                })
        }
        _ => false,
    }
}

#[derive(Clone, Debug)]
pub struct Act {
    pub service: String,
    pub outcome: String,
    pub needs: Vec<Fact>,
    pub adds: BTreeSet<Fact>,
    pub deletes: Vec<Fact>,
}

/// A world as the oracle sees it.
pub struct Model<'a> {
    pub ontology: &'a OntologyStore,
    pub acts: Vec<Act>,
    pub initial: BTreeSet<Fact>,
    pub goals: Vec<Fact>,
    universe: BTreeSet<Fact>,
}

impl<'a> Model<'a> {
    pub fn new(ontology: &'a OntologyStore, registry: &Registry, request: &AbstractRequest) -> Self {
        let known = |c: &ClassRef| ontology.resolves(c);
        let mut acts = Vec::new();
        for p in registry.profiles() {
            if !request
                .nonfunctional_filters
                .iter()
                .all(|f| f.passes(&p.nonfunctional, ontology))
            {
                continue;
            }
            let mut needs: Vec<Fact> = p.inputs.iter().map(|i| Fact::Avail(i.ty.as_str().into())).collect();
            needs.extend(p.preconditions.iter().map(|c| status_fact(c, Some(p))));
            for e in &p.effects {
                let mut adds: BTreeSet<Fact> = p
                    .outputs
                    .iter()
                    .filter(|o| known(&o.ty))
                    .map(|o| Fact::Avail(o.ty.as_str().into()))
                    .collect();
                adds.extend(e.adds.iter().filter(|a| known(&a.class)).map(|a| status_fact(a, Some(p))));
                acts.push(Act {
                    service: p.id.clone(),
                    outcome: e.label.clone(),
                    needs: needs.clone(),
                    adds,
                    deletes: e.deletes.iter().map(|d| status_fact(d, Some(p))).collect(),
                });
            }
        }
        let mut initial: BTreeSet<Fact> = request
            .available_inputs
            .iter()
            .filter(|c| known(c))
            .map(|c| Fact::Avail(c.as_str().into()))
            .collect();
        initial.extend(
            request
                .initial_statuses
                .iter()
                .filter(|s| known(&s.class))
                .map(|s| status_fact(s, None)),
        );
        let mut goals: Vec<Fact> = request.goal_outputs.iter().map(|c| Fact::Avail(c.as_str().into())).collect();
        goals.extend(request.goal_statuses.iter().map(|s| status_fact(s, None)));
        let mut universe = initial.clone();
        for a in &acts {
            universe.extend(a.adds.iter().cloned());
        }
        Self {
            ontology,
            acts,
            initial,
            goals,
            universe,
        }
    }

    pub fn index(&self, service: &str, outcome: &str) -> Option<usize> {
        self.acts.iter().position(|a| a.service == service && a.outcome == outcome)
    }

    pub fn holds(&self, state: &BTreeSet<Fact>, want: &Fact) -> bool {
        state.iter().any(|f| satisfies(self.ontology, f, want))
    }

    pub fn applicable(&self, a: usize, state: &BTreeSet<Fact>) -> bool {
        self.acts[a].needs.iter().all(|n| self.holds(state, n))
    }

    /// Status facts `a` removes: anything it could ever see that matches a
    /// delete pattern, minus what it adds itself.
    pub fn dels(&self, a: usize) -> BTreeSet<Fact> {
        let act = &self.acts[a];
        self.universe
            .iter()
            .filter(|f| matches!(f, Fact::Status(..)))
            .filter(|f| act.deletes.iter().any(|d| satisfies(self.ontology, f, d)))
            .filter(|f| !act.adds.contains(*f))
            .cloned()
            .collect()
    }

    /// Alternative outcomes of one service, or effects that contradict.
    pub fn inconsistent(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.acts[a], &self.acts[b]);
        if x.service == y.service {
            return x.outcome != y.outcome;
        }
        self.dels(a).iter().any(|f| y.adds.contains(f)) || self.dels(b).iter().any(|f| x.adds.contains(f))
    }

    /// One deletes something that could support a need of the other.
    pub fn interferes(&self, a: usize, b: usize) -> bool {
        let one_way = |a: usize, b: usize| {
            self.dels(a)
                .iter()
                .any(|f| self.acts[b].needs.iter().any(|n| satisfies(self.ontology, f, n)))
        };
        one_way(a, b) || one_way(b, a)
    }

    pub fn conflict(&self, a: usize, b: usize) -> bool {
        a != b && (self.inconsistent(a, b) || self.interferes(a, b))
    }

    pub fn step(&self, state: &BTreeSet<Fact>, layer: &[usize]) -> Option<BTreeSet<Fact>> {
        for (i, &a) in layer.iter().enumerate() {
            if !self.applicable(a, state) {
                return None;
            }
            if layer[i + 1..].iter().any(|&b| b == a || self.conflict(a, b)) {
                return None;
            }
        }
        let mut next = state.clone();
        for &a in layer {
            for f in self.dels(a) {
                next.remove(&f);
            }
        }
        for &a in layer {
            next.extend(self.acts[a].adds.iter().cloned());
        }
        Some(next)
    }

    pub fn valid(&self, layers: &[Vec<usize>]) -> bool {
        let mut s = self.initial.clone();
        for l in layers {
            match self.step(&s, l) {
                Some(n) => s = n,
                None => return false,
            }
        }
        self.goals.iter().all(|g| self.holds(&s, g))
    }

    pub fn removal_minimal(&self, layers: &[Vec<usize>]) -> bool {
        (0..layers.len()).all(|li| {
            (0..layers[li].len()).all(|k| {
                let mut r = layers.to_vec();
                r[li].remove(k);
                !self.valid(&r)
            })
        })
    }

    pub fn ids(&self, plan: &Plan) -> Option<Vec<Vec<usize>>> {
        plan.layers
            .iter()
            .map(|l| l.iter().map(|s| self.index(&s.service, &s.outcome)).collect())
            .collect()
    }

    /// A plan is valid when every layer is applicable and conflict-free
    /// and the goals hold at the end.
    pub fn plan_valid(&self, plan: &Plan) -> bool {
        self.ids(plan).is_some_and(|l| self.valid(&l))
    }

    /// Co-scheduled pairs violating a mutex rule: inconsistent effects,
    /// interference, or needs that cannot hold together where they run.
    pub fn mutex_violations(&self, plan: &Plan) -> Vec<(String, String, &'static str)> {
        let Some(layers) = self.ids(plan) else {
            return vec![("?".into(), "?".into(), "unknown action")];
        };
        let mut out = Vec::new();
        let mut state = self.initial.clone();
        for l in &layers {
            for (i, &a) in l.iter().enumerate() {
                for &b in &l[i + 1..] {
                    let name = |x: usize| format!("{}[{}]", self.acts[x].service, self.acts[x].outcome);
                    if self.inconsistent(a, b) {
                        out.push((name(a), name(b), "inconsistent effects"));
                    }
                    if self.interferes(a, b) {
                        out.push((name(a), name(b), "interference"));
                    }
                    if !(self.applicable(a, &state) && self.applicable(b, &state)) {
                        out.push((name(a), name(b), "competing needs"));
                    }
                }
            }
            match self.step(&state, l) {
                Some(n) => state = n,
                None => break,
            }
        }
        out
    }

    /// Every removal-minimal valid plan with the fewest layers, up to
    /// `max_layers`. An action in such a plan must add something new where
    /// it runs (dropping one that does not leaves a superset state, which
    /// keeps the plan valid), so only such layers are expanded.
    pub fn minimal_plans(&self, max_layers: usize) -> BTreeSet<Vec<Vec<(String, String)>>> {
        for depth in 0..=max_layers {
            let mut found = BTreeSet::new();
            let mut prefix = Vec::new();
            self.dfs(&self.initial, depth, &mut prefix, &mut found);
            if !found.is_empty() {
                return found;
            }
        }
        BTreeSet::new()
    }

    fn dfs(
        &self,
        state: &BTreeSet<Fact>,
        left: usize,
        prefix: &mut Vec<Vec<usize>>,
        found: &mut BTreeSet<Vec<Vec<(String, String)>>>,
    ) {
        if left == 0 {
            if self.valid(prefix) && self.removal_minimal(prefix) {
                found.insert(canonical(self, prefix));
            }
            return;
        }
        let cands: Vec<usize> = (0..self.acts.len())
            .filter(|&a| self.applicable(a, state) && self.acts[a].adds.iter().any(|f| !state.contains(f)))
            .collect();
        let mut layer = Vec::new();
        self.subsets(&cands, 0, &mut layer, state, left, prefix, found);
    }

    #[allow(clippy::too_many_arguments)]
    fn subsets(
        &self,
        cands: &[usize],
        from: usize,
        layer: &mut Vec<usize>,
        state: &BTreeSet<Fact>,
        left: usize,
        prefix: &mut Vec<Vec<usize>>,
        found: &mut BTreeSet<Vec<Vec<(String, String)>>>,
    ) {
        if !layer.is_empty() {
            if let Some(next) = self.step(state, layer) {
                prefix.push(layer.clone());
                self.dfs(&next, left - 1, prefix, found);
                prefix.pop();
            }
        }
        for i in from..cands.len() {
            let c = cands[i];
            if layer.iter().any(|&m| self.conflict(m, c)) {
                continue;
            }
            layer.push(c);
            self.subsets(cands, i + 1, layer, state, left, prefix, found);
            layer.pop();
        }
    }
}

/// Layers as sorted (service, outcome) lists.
pub fn canonical(model: &Model<'_>, layers: &[Vec<usize>]) -> Vec<Vec<(String, String)>> {
    layers
        .iter()
        .map(|l| {
            let mut v: Vec<(String, String)> = l
                .iter()
                .map(|&a| (model.acts[a].service.clone(), model.acts[a].outcome.clone()))
                .collect();
            v.sort();
            v
        })
        .collect()
}

pub fn canonical_plan(plan: &Plan) -> Vec<Vec<(String, String)>> {
    plan.layers
        .iter()
        .map(|l| {
            let mut v: Vec<(String, String)> = l.iter().map(|s| (s.service.clone(), s.outcome.clone())).collect();
            v.sort();
            v
        })
        .collect()
}

/// Reflexive-transitive closure of `edges` (child, parent) over `n` nodes.
#[allow(clippy::needless_range_loop)]
pub fn closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut up = vec![vec![false; n]; n];
    for (i, row) in up.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(c, p) in edges {
        up[c][p] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if up[i][k] {
                for j in 0..n {
                    if up[k][j] {
                        up[i][j] = true;
                    }
                }
            }
        }
    }
    up
}
