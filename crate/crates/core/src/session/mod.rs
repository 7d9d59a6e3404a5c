//! Working contexts, the engine that owns them, and the request dispatch
//! shared by the wire API, the CLI and the C ABI.

mod export;
mod store;
pub mod wire;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

pub use export::{composite_profile, export_process, import_process, ExportFormat, PlanReport};
pub use store::SessionStore;

use crate::assist::{self, Catalog, ConflictReport, Diagnostic, Payload, Suggestion};
use crate::error::{EngineError, PlanError};
use crate::ontology::{ClassifyReport, LoadReport, OntologyFormat, OntologyStore};
use crate::planner::{build_graph, extract_plans, AbstractRequest, Basis, Cursor, GraphStats, Plan, PlanGraph, PlanToken};
use crate::process::{CompositeProcess, Delta, Placement};
use crate::registry::{DiscoveryQuery, Registered, Registry, ServiceMatch, ServiceProfile, Target};

pub type SessionId = String;

/// Pending suggestions kept per session; the oldest are dropped first.
const MAX_PENDING: usize = 512;

/// A consistent view of the ontology and registry.
#[derive(Clone, Default)]
pub struct Snapshot {
    pub ontology: Arc<OntologyStore>,
    pub registry: Arc<Registry>,
}

impl Snapshot {
    pub fn catalog(&self) -> Catalog<'_> {
        Catalog {
            registry: &self.registry,
            ontology: &self.ontology,
        }
    }

    fn basis(&self, request: &AbstractRequest) -> Basis {
        Basis {
            registry_version: self.registry.version(),
            ontology_version: self.ontology.version(),
            request_hash: request.hash(),
        }
    }
}

struct PlanCache {
    graph: PlanGraph,
    cursor: Option<Cursor>,
}

/// Per-session state.
#[derive(Serialize, Deserialize)]
pub struct WorkingContext {
    pub id: SessionId,
    #[serde(default)]
    pub request: Option<AbstractRequest>,
    #[serde(default)]
    pub process: CompositeProcess,
    #[serde(default)]
    pub pending: Vec<Suggestion>,
    /// Applied deltas, oldest first; undo pops from the end.
    #[serde(default)]
    pub history: Vec<Delta>,
    #[serde(skip)]
    cache: Option<PlanCache>,
}

impl WorkingContext {
    pub fn new(id: SessionId) -> Self {
        Self {
            id,
            request: None,
            process: CompositeProcess::default(),
            pending: Vec::new(),
            history: Vec::new(),
            cache: None,
        }
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// The process obtained by replaying the history from empty.
    pub fn replay(&self) -> Result<CompositeProcess, EngineError> {
        let mut p = CompositeProcess::default();
        for d in &self.history {
            p.apply(d, None)?;
        }
        Ok(p)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            request: self.request.clone(),
            process: self.process.clone(),
            process_hash: self.process.content_hash(),
            pending: self.pending.clone(),
            history_len: self.history.len(),
            cached_graph: self.cache.is_some(),
        }
    }

    fn offer(&mut self, suggestions: &[Suggestion]) {
        for s in suggestions {
            self.pending.retain(|p| p.id != s.id);
            self.pending.push(s.clone());
        }
        if self.pending.len() > MAX_PENDING {
            let excess = self.pending.len() - MAX_PENDING;
            self.pending.drain(..excess);
        }
    }

    fn commit(&mut self, delta: Delta, registry: &Registry) -> Result<(), EngineError> {
        if delta.is_empty() {
            return Ok(());
        }
        self.process.apply(&delta, Some(registry))?;
        self.history.push(delta);
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: SessionId,
    pub request: Option<AbstractRequest>,
    pub process: CompositeProcess,
    pub process_hash: String,
    pub pending: Vec<Suggestion>,
    pub history_len: usize,
    pub cached_graph: bool,
}

/// A meta-control request dispatched to one session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verb")]
pub enum Request {
    Discover {
        query: DiscoveryQuery,
    },
    Producers {
        target: Target,
    },
    Successors {
        service: String,
    },
    SuggestConsolidations {
        producer: String,
        consumer: String,
    },
    CompleteDataflow,
    VerifyDataflow,
    SuggestOrderings,
    VerifyControlflow,
    /// Both verifications.
    Verify,
    DetectConflicts {
        service: String,
        #[serde(default)]
        outcome: Option<String>,
        position: Placement,
    },
    SuggestInsertions,
    SuggestRemovals,
    Plan {
        k: usize,
        /// Continue from this token instead of the session's own cursor.
        #[serde(default)]
        resume: Option<String>,
        /// Start enumeration over.
        #[serde(default)]
        restart: bool,
    },
    Relax,
    ApplySuggestion {
        id: String,
    },
    DismissSuggestion {
        id: String,
    },
    Undo,
    EditProcess {
        delta: Delta,
    },
}

impl Request {
    pub fn verb(&self) -> &'static str {
        match self {
            Request::Discover { .. } => "discover",
            Request::Producers { .. } => "producers",
            Request::Successors { .. } => "successors",
            Request::SuggestConsolidations { .. } => "suggest_consolidations",
            Request::CompleteDataflow => "complete_dataflow",
            Request::VerifyDataflow => "verify_dataflow",
            Request::SuggestOrderings => "suggest_orderings",
            Request::VerifyControlflow => "verify_controlflow",
            Request::Verify => "verify",
            Request::DetectConflicts { .. } => "detect_conflicts",
            Request::SuggestInsertions => "suggest_insertions",
            Request::SuggestRemovals => "suggest_removals",
            Request::Plan { .. } => "plan",
            Request::Relax => "relax",
            Request::ApplySuggestion { .. } => "apply_suggestion",
            Request::DismissSuggestion { .. } => "dismiss_suggestion",
            Request::Undo => "undo",
            Request::EditProcess { .. } => "edit_process",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Response {
    Services {
        matches: Vec<ServiceMatch>,
    },
    Suggestions {
        suggestions: Vec<Suggestion>,
    },
    Diagnostics {
        diagnostics: Vec<Diagnostic>,
    },
    Conflicts {
        report: ConflictReport,
    },
    Completion {
        delta: Delta,
        applied: Vec<Suggestion>,
        ambiguous: Vec<Suggestion>,
        process: CompositeProcess,
    },
    Plans {
        plans: Vec<Plan>,
        /// One adoption suggestion per plan, in the same order.
        suggestions: Vec<Suggestion>,
        token: String,
        terminal: bool,
        stats: GraphStats,
    },
    Process {
        delta: Delta,
        process: CompositeProcess,
        diagnostics: Vec<Diagnostic>,
    },
    Request {
        request: AbstractRequest,
        diagnostics: Vec<Diagnostic>,
    },
    Dismissed {
        id: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestUpdate {
    /// Classes the request names that the ontology does not know.
    pub unresolved: Vec<String>,
    pub cache_retained: bool,
    /// The kept process re-verified against the new request.
    pub diagnostics: Vec<Diagnostic>,
}

/// The ontology, the registry and every working context.
#[derive(Default)]
pub struct Engine {
    snapshot: RwLock<Snapshot>,
    writer: Mutex<()>,
    sessions: Mutex<BTreeMap<SessionId, Arc<Mutex<WorkingContext>>>>,
    store: Option<SessionStore>,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    /// An engine persisting sessions under `dir`, reloading any found there.
    pub fn with_store(dir: impl Into<PathBuf>) -> Result<Self, EngineError> {
        let store = SessionStore::open(dir.into())?;
        let mut sessions = BTreeMap::new();
        for ctx in store.load_all()? {
            sessions.insert(ctx.id.clone(), Arc::new(Mutex::new(ctx)));
        }
        Ok(Self {
            sessions: Mutex::new(sessions),
            store: Some(store),
            ..Self::default()
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn mutate<T>(&self, f: impl FnOnce(&mut Snapshot) -> Result<T, EngineError>) -> Result<T, EngineError> {
        let _guard = self.writer.lock().expect("writer lock");
        let mut next = self.snapshot();
        let out = f(&mut next)?;
        *self.snapshot.write().expect("snapshot lock") = next;
        Ok(out)
    }

    pub fn load_ontology(&self, document: &str, format: Option<OntologyFormat>) -> Result<LoadReport, EngineError> {
        let format = format.unwrap_or_else(|| OntologyFormat::sniff(document));
        self.mutate(|s| {
            let mut o = (*s.ontology).clone();
            let report = o.load(document, format)?;
            s.ontology = Arc::new(o);
            Ok(report)
        })
    }

    pub fn classify(&self) -> Result<ClassifyReport, EngineError> {
        self.mutate(|s| {
            let mut o = (*s.ontology).clone();
            let report = o.classify();
            s.ontology = Arc::new(o);
            Ok(report)
        })
    }

    /// Registers all profiles or none.
    pub fn register(&self, profiles: Vec<ServiceProfile>) -> Result<Vec<Registered>, EngineError> {
        self.mutate(|s| {
            let mut r = (*s.registry).clone();
            let out = profiles
                .into_iter()
                .map(|p| r.register(p, &s.ontology))
                .collect::<Result<Vec<_>, _>>()?;
            s.registry = Arc::new(r);
            Ok(out)
        })
    }

    pub fn deregister(&self, id: &str) -> Result<ServiceProfile, EngineError> {
        self.mutate(|s| {
            let mut r = (*s.registry).clone();
            let p = r.deregister(id)?;
            s.registry = Arc::new(r);
            Ok((*p).clone())
        })
    }

    pub fn services(&self) -> Vec<ServiceProfile> {
        self.snapshot().registry.profiles().cloned().collect()
    }

    pub fn discover(&self, query: &DiscoveryQuery) -> Result<Vec<ServiceMatch>, EngineError> {
        let s = self.snapshot();
        Ok(s.registry.discover(query, &s.ontology)?)
    }

    pub fn create_session(&self) -> Result<SessionId, EngineError> {
        let mut sessions = self.sessions.lock().expect("session map");
        let n = sessions
            .keys()
            .filter_map(|k| k.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0)
            + 1;
        let ctx = WorkingContext::new(format!("s{n}"));
        if let Some(store) = &self.store {
            store.save(&ctx)?;
        }
        let id = ctx.id.clone();
        sessions.insert(id.clone(), Arc::new(Mutex::new(ctx)));
        Ok(id)
    }

    pub fn session_ids(&self) -> Vec<SessionId> {
        self.sessions.lock().expect("session map").keys().cloned().collect()
    }

    fn context(&self, id: &str) -> Result<Arc<Mutex<WorkingContext>>, EngineError> {
        self.sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession(id.to_string()))
    }

    /// Runs `f` on the session with its lock held, persisting afterwards
    /// if the call succeeded.
    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut WorkingContext, &Snapshot) -> Result<T, EngineError>,
    ) -> Result<T, EngineError> {
        let ctx = self.context(id)?;
        let mut ctx = ctx.lock().unwrap_or_else(|e| e.into_inner());
        let snap = self.snapshot();
        let out = f(&mut ctx, &snap)?;
        if let Some(store) = &self.store {
            store.save(&ctx)?;
        }
        Ok(out)
    }

    pub fn session(&self, id: &str) -> Result<SessionView, EngineError> {
        let ctx = self.context(id)?;
        let ctx = ctx.lock().unwrap_or_else(|e| e.into_inner());
        Ok(ctx.view())
    }

    pub fn set_request(&self, id: &str, request: AbstractRequest) -> Result<RequestUpdate, EngineError> {
        self.with_session(id, |ctx, snap| set_request(ctx, snap, request))
    }

    pub fn invoke(&self, id: &str, request: Request) -> Result<Response, EngineError> {
        self.with_session(id, |ctx, snap| dispatch(ctx, snap, request))
    }

    pub fn export(&self, id: &str, format: ExportFormat) -> Result<String, EngineError> {
        let ctx = self.context(id)?;
        let ctx = ctx.lock().unwrap_or_else(|e| e.into_inner());
        export_process(&ctx.process, ctx.request.as_ref(), format, self.snapshot().catalog())
    }

    /// Replaces the session's process with the one in an exported bundle.
    pub fn import(&self, id: &str, document: &str) -> Result<Response, EngineError> {
        self.with_session(id, |ctx, snap| {
            let next = import_process(document)?;
            let delta = ctx.process.replacement_delta(&next);
            ctx.commit(delta.clone(), &snap.registry)?;
            process_response(ctx, snap, delta)
        })
    }
}

fn set_request(ctx: &mut WorkingContext, snap: &Snapshot, request: AbstractRequest) -> Result<RequestUpdate, EngineError> {
    request.validate()?;
    let same = ctx.request.as_ref().is_some_and(|r| r.hash() == request.hash());
    if !same {
        ctx.cache = None;
    }
    let unresolved = request
        .unresolved(&snap.ontology)
        .iter()
        .map(|c| c.as_str().to_string())
        .collect();
    ctx.request = Some(request);
    let diagnostics = assist::verify_all(&ctx.process, ctx.request.as_ref(), snap.catalog())?;
    Ok(RequestUpdate {
        unresolved,
        cache_retained: same && ctx.cache.is_some(),
        diagnostics,
    })
}

fn process_response(ctx: &WorkingContext, snap: &Snapshot, delta: Delta) -> Result<Response, EngineError> {
    Ok(Response::Process {
        delta,
        process: ctx.process.clone(),
        diagnostics: assist::verify_all(&ctx.process, ctx.request.as_ref(), snap.catalog())?,
    })
}

fn suggestions(ctx: &mut WorkingContext, list: Vec<Suggestion>) -> Response {
    ctx.offer(&list);
    Response::Suggestions { suggestions: list }
}

fn dispatch(ctx: &mut WorkingContext, snap: &Snapshot, request: Request) -> Result<Response, EngineError> {
    let catalog = snap.catalog();
    let req = ctx.request.clone();
    let req = req.as_ref();
    Ok(match request {
        Request::Discover { query } => Response::Services {
            matches: snap.registry.discover(&query, &snap.ontology)?,
        },
        Request::Producers { target } => Response::Services {
            matches: snap.registry.producers_of(&target, &snap.ontology)?,
        },
        Request::Successors { service } => Response::Services {
            matches: snap.registry.successors_of(&service, &snap.ontology)?,
        },
        Request::SuggestConsolidations { producer, consumer } => {
            let list = assist::suggest_consolidations(&ctx.process, &producer, &consumer, catalog)?;
            suggestions(ctx, list)
        }
        Request::CompleteDataflow => {
            let c = assist::complete_dataflow(&ctx.process, catalog);
            ctx.commit(c.delta.clone(), &snap.registry)?;
            ctx.offer(&c.ambiguous);
            Response::Completion {
                delta: c.delta,
                applied: c.applied,
                ambiguous: c.ambiguous,
                process: ctx.process.clone(),
            }
        }
        Request::VerifyDataflow => Response::Diagnostics {
            diagnostics: assist::verify_dataflow(&ctx.process, req, catalog),
        },
        Request::VerifyControlflow => Response::Diagnostics {
            diagnostics: assist::verify_controlflow(&ctx.process, req, catalog)?,
        },
        Request::Verify => Response::Diagnostics {
            diagnostics: assist::verify_all(&ctx.process, req, catalog)?,
        },
        Request::SuggestOrderings => {
            let list = assist::suggest_orderings(&ctx.process, req, catalog)?;
            suggestions(ctx, list)
        }
        Request::DetectConflicts {
            service,
            outcome,
            position,
        } => {
            let report = assist::detect_conflicts(&ctx.process, &service, outcome.as_deref(), &position, req, catalog)?;
            ctx.offer(&report.suggestions);
            Response::Conflicts { report }
        }
        Request::SuggestInsertions => {
            let list = assist::suggest_insertions(&ctx.process, req, catalog)?;
            suggestions(ctx, list)
        }
        Request::SuggestRemovals => {
            let list = assist::suggest_removals(&ctx.process, catalog)?;
            suggestions(ctx, list)
        }
        Request::Relax => {
            let r = req.ok_or(EngineError::NoRequest)?;
            let list = assist::suggest_relaxations(r, catalog)?;
            suggestions(ctx, list)
        }
        Request::Plan { k, resume, restart } => plan(ctx, snap, k, resume, restart)?,
        Request::ApplySuggestion { id } => {
            let s = ctx
                .pending
                .iter()
                .find(|s| s.id == id)
                .cloned()
                .ok_or_else(|| EngineError::UnknownSuggestion(id.clone()))?;
            if !s.is_current(&ctx.process, req) {
                return Err(EngineError::StaleSuggestion(id));
            }
            ctx.pending.retain(|p| p.id != id);
            match s.payload {
                Payload::Delta(delta) => {
                    ctx.commit(delta.clone(), &snap.registry)?;
                    process_response(ctx, snap, delta)?
                }
                Payload::Request(request) => {
                    let update = set_request(ctx, snap, request.clone())?;
                    Response::Request {
                        request,
                        diagnostics: update.diagnostics,
                    }
                }
            }
        }
        Request::DismissSuggestion { id } => {
            let before = ctx.pending.len();
            ctx.pending.retain(|p| p.id != id);
            if ctx.pending.len() == before {
                return Err(EngineError::UnknownSuggestion(id));
            }
            Response::Dismissed { id }
        }
        Request::Undo => {
            let last = ctx.history.last().ok_or(EngineError::EmptyHistory)?;
            let inverse = last.inverse();
            ctx.process.apply(&inverse, None)?;
            ctx.history.pop();
            process_response(ctx, snap, inverse)?
        }
        Request::EditProcess { delta } => {
            ctx.commit(delta.clone(), &snap.registry)?;
            process_response(ctx, snap, delta)?
        }
    })
}

fn plan(
    ctx: &mut WorkingContext,
    snap: &Snapshot,
    k: usize,
    resume: Option<String>,
    restart: bool,
) -> Result<Response, EngineError> {
    let request = ctx.request.clone().ok_or(EngineError::NoRequest)?;
    let basis = snap.basis(&request);
    if ctx.cache.as_ref().is_some_and(|c| c.graph.basis() != &basis) {
        ctx.cache = None;
    }
    let cursor = match resume {
        Some(text) => {
            let token = PlanToken::decode(&text)?;
            if token.basis != basis {
                return Err(PlanError::TokenMismatch.into());
            }
            Some(token.cursor)
        }
        None if restart => None,
        None => ctx.cache.as_ref().and_then(|c| c.cursor.clone()),
    };
    let mut graph = match ctx.cache.take() {
        Some(c) => c.graph,
        None => build_graph(&request, &snap.registry, &snap.ontology)?,
    };
    let ex = extract_plans(&mut graph, cursor, k);
    let stats = graph.stats();
    ctx.cache = Some(PlanCache {
        graph,
        cursor: Some(ex.cursor.clone()),
    });
    let token = PlanToken {
        basis,
        cursor: ex.cursor,
    }
    .encode();
    let adopt = ex
        .plans
        .iter()
        .map(|p| assist::adopt_plan(&ctx.process, p, snap.catalog()))
        .collect::<Result<Vec<_>, _>>()?;
    ctx.offer(&adopt);
    Ok(Response::Plans {
        plans: ex.plans,
        suggestions: adopt,
        token,
        terminal: ex.terminal,
        stats,
    })
}
