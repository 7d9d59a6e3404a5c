//! GraphPlan-style composition over semantically matched services.
//!
//! Each (service, outcome) pair becomes one action; outcomes of a service are
//! pairwise mutex and the outcome used by a plan is recorded as an
//! assumption. Parameter types and status patterns are matched by
//! subsumption when the domain is compiled.

mod domain;
mod extract;
mod graph;
mod process;

use std::sync::Arc;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use domain::{ActId, Action, Domain, Prop, PropId, ReqId, Requirement};
pub use extract::{Cursor, ExtractMode};
pub use graph::{Basis, GraphStats, Level, MutexRel, PlanGraph};
pub use process::plan_to_process;

use crate::error::PlanError;
use crate::ontology::{ClassRef, OntologyStore};
use crate::registry::{NfFilter, Registry, StatusPattern};

fn default_max_plans() -> usize {
    1
}

/// The user's declarative description of the composite service wanted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractRequest {
    #[serde(default)]
    pub available_inputs: Vec<ClassRef>,
    #[serde(default)]
    pub initial_statuses: Vec<StatusPattern>,
    #[serde(default)]
    pub goal_outputs: Vec<ClassRef>,
    #[serde(default)]
    pub goal_statuses: Vec<StatusPattern>,
    #[serde(default)]
    pub nonfunctional_filters: Vec<NfFilter>,
    #[serde(default = "default_max_plans")]
    pub max_plans: usize,
    /// Maximum number of levels; defaults to twice the registry size.
    #[serde(default)]
    pub horizon: Option<usize>,
}

impl AbstractRequest {
    pub fn simple(inputs: &[&str], goals: &[&str]) -> Self {
        Self {
            available_inputs: inputs.iter().map(|c| ClassRef::new(*c)).collect(),
            initial_statuses: Vec::new(),
            goal_outputs: goals.iter().map(|c| ClassRef::new(*c)).collect(),
            goal_statuses: Vec::new(),
            nonfunctional_filters: Vec::new(),
            max_plans: 1,
            horizon: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.goal_outputs.is_empty() && self.goal_statuses.is_empty() {
            return Err(PlanError::NoGoals);
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex(&Sha256::digest(bytes))
    }

    /// Every class the request refers to that the ontology does not know.
    pub fn unresolved(&self, ontology: &OntologyStore) -> Vec<ClassRef> {
        let statuses = self.initial_statuses.iter().chain(&self.goal_statuses).map(|s| &s.class);
        let mut out: Vec<ClassRef> = self
            .available_inputs
            .iter()
            .chain(&self.goal_outputs)
            .chain(statuses)
            .filter(|c| !ontology.resolves(c))
            .cloned()
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn default_horizon(services: usize) -> usize {
    (2 * services).max(1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanStep {
    pub service: String,
    pub outcome: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    /// Actions per layer; actions within a layer may run in parallel.
    pub layers: Vec<Vec<PlanStep>>,
    /// The outcome each step is assumed to take.
    pub assumptions: Vec<PlanStep>,
    pub achieves: Vec<String>,
}

impl Plan {
    pub fn from_ids(domain: &Domain, layers: &[Vec<ActId>]) -> Self {
        let layers: Vec<Vec<PlanStep>> = layers
            .iter()
            .map(|l| {
                l.iter()
                    .map(|&a| {
                        let act = domain.action(a);
                        PlanStep {
                            service: act.service.clone(),
                            outcome: act.outcome.clone(),
                        }
                    })
                    .collect()
            })
            .collect();
        let mut assumptions: Vec<PlanStep> = layers.iter().flatten().cloned().collect();
        assumptions.sort();
        assumptions.dedup();
        Plan {
            layers,
            assumptions,
            achieves: domain
                .goals()
                .iter()
                .map(|&g| domain.requirement(g).key.to_string())
                .collect(),
        }
    }

    /// Maps the plan back onto `domain`; `None` if a step is unknown there.
    pub fn to_ids(&self, domain: &Domain) -> Option<Vec<Vec<ActId>>> {
        self.layers
            .iter()
            .map(|l| l.iter().map(|s| domain.action_id(&s.service, &s.outcome)).collect())
            .collect()
    }

    pub fn step_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }
}

/// Compiles the domain and expands the graph until the goals are reachable,
/// the graph levels off, or the horizon is hit.
pub fn build_graph(request: &AbstractRequest, registry: &Registry, ontology: &OntologyStore) -> Result<PlanGraph, PlanError> {
    request.validate()?;
    let domain = Domain::compile(ontology, registry.profiles(), request)?;
    let horizon = request.horizon.unwrap_or_else(|| default_horizon(registry.len()));
    let basis = Basis {
        registry_version: registry.version(),
        ontology_version: ontology.version(),
        request_hash: request.hash(),
    };
    let mut graph = PlanGraph::new(Arc::new(domain), horizon, basis);
    graph.build();
    Ok(graph)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub plans: Vec<Plan>,
    pub cursor: Cursor,
    /// Enumeration is exhausted.
    pub terminal: bool,
}

/// Returns up to `k` further plans. `k = 0` only reports reachability
/// through `terminal`, leaving the cursor untouched.
pub fn extract_plans(graph: &mut PlanGraph, cursor: Option<Cursor>, k: usize) -> Extraction {
    let mut cursor = cursor.unwrap_or_else(|| Cursor::new(ExtractMode::MinimalLevel));
    let mut plans = Vec::new();
    if k == 0 {
        let terminal = cursor.is_done() || !graph.goals_reachable();
        return Extraction {
            plans,
            cursor,
            terminal,
        };
    }
    while plans.len() < k {
        match cursor.next_plan(graph) {
            Some(ids) => plans.push(Plan::from_ids(graph.domain(), &ids)),
            None => break,
        }
    }
    let terminal = cursor.is_done();
    Extraction {
        plans,
        cursor,
        terminal,
    }
}

/// A continuation token: the cursor plus the basis it was computed on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanToken {
    pub basis: Basis,
    pub cursor: Cursor,
}

impl PlanToken {
    pub fn encode(&self) -> String {
        URL_SAFE_NO_PAD.encode(serde_json::to_vec(self).expect("token serializes"))
    }

    pub fn decode(text: &str) -> Result<Self, PlanError> {
        let bytes = URL_SAFE_NO_PAD
            .decode(text.trim())
            .map_err(|e| PlanError::MalformedToken(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| PlanError::MalformedToken(e.to_string()))
    }

    /// Fails with `TokenMismatch` if the graph was built on another basis.
    pub fn check(&self, graph: &PlanGraph) -> Result<(), PlanError> {
        if &self.basis == graph.basis() {
            Ok(())
        } else {
            Err(PlanError::TokenMismatch)
        }
    }
}
