//! HTTP/JSON front end over an [`Engine`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Engine, ExportFormat, Request};
use crate::error::{EngineError, RegistryError};
use crate::ontology::{ClassRef, OntologyFormat};
use crate::planner::AbstractRequest;
use crate::process::{Delta, Placement};
use crate::registry::{parse_profiles, DiscoveryQuery, StatusPattern, Target};

/// An engine error rendered as `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError(pub EngineError);

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &EngineError) -> StatusCode {
    match e.kind() {
        "unknown_session" | "unknown_suggestion" | "unknown_service" | "unknown_step" => StatusCode::NOT_FOUND,
        "stale_suggestion" | "duplicate" | "conflict" | "token_mismatch" => StatusCode::CONFLICT,
        "malformed" | "parse" | "malformed_token" => StatusCode::BAD_REQUEST,
        "storage" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let body = json!({ "error": self.0.kind(), "message": self.0.to_string() });
        (status_of(&self.0), Json(body)).into_response()
    }
}

type Reply = Result<Json<Value>, ApiError>;

fn to_json<T: Serialize>(v: T) -> Json<Value> {
    Json(serde_json::to_value(v).expect("response serializes"))
}

/// Runs engine work off the async executor.
async fn run<T: Serialize + Send + 'static>(
    engine: Arc<Engine>,
    f: impl FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
) -> Reply {
    let out = tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(|e| ApiError(EngineError::Storage(format!("worker failed: {e}"))))??;
    Ok(to_json(out))
}

fn malformed(e: impl std::fmt::Display) -> ApiError {
    ApiError(EngineError::Malformed(e.to_string()))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    serde_json::from_str(body).map_err(malformed)
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn load_ontology(State(e): State<Arc<Engine>>, Query(q): Query<FormatQuery>, body: String) -> Reply {
    let format = match q.format.as_deref() {
        None => None,
        Some("triples") => Some(OntologyFormat::Triples),
        Some("structured") => Some(OntologyFormat::Structured),
        Some(other) => return Err(malformed(format!("unknown ontology format '{other}'"))),
    };
    run(e, move |e| e.load_ontology(&body, format)).await
}

async fn classify(State(e): State<Arc<Engine>>) -> Reply {
    run(e, |e| e.classify()).await
}

#[derive(Deserialize)]
struct ServiceQuery {
    input: Option<String>,
    output: Option<String>,
    effect: Option<String>,
    max: Option<usize>,
}

fn split(list: &Option<String>) -> Vec<&str> {
    list.as_deref()
        .map(|s| s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default()
}

async fn list_services(State(e): State<Arc<Engine>>, Query(q): Query<ServiceQuery>) -> Reply {
    let query = DiscoveryQuery {
        required_inputs: split(&q.input).into_iter().map(ClassRef::new).collect(),
        desired_outputs: split(&q.output).into_iter().map(ClassRef::new).collect(),
        desired_effects: split(&q.effect).into_iter().map(StatusPattern::new).collect(),
        nonfunctional_filters: Vec::new(),
        max_results: q.max,
    };
    if query.required_inputs.is_empty() && query.desired_outputs.is_empty() && query.desired_effects.is_empty() {
        return run(e, |e| Ok(e.services())).await;
    }
    run(e, move |e| e.discover(&query)).await
}

async fn register(State(e): State<Arc<Engine>>, body: String) -> Reply {
    let profiles = parse_profiles(&body).map_err(malformed)?;
    run(e, move |e| e.register(profiles)).await
}

async fn get_service(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, move |e| {
        e.snapshot()
            .registry
            .get(&id)
            .cloned()
            .ok_or(EngineError::Registry(RegistryError::UnknownService(id)))
    })
    .await
}

async fn deregister(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, move |e| e.deregister(&id)).await
}

async fn create_session(State(e): State<Arc<Engine>>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let id = e.create_session()?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id }))))
}

async fn list_sessions(State(e): State<Arc<Engine>>) -> Reply {
    Ok(to_json(e.session_ids()))
}

async fn get_session(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    run(e, move |e| e.session(&id)).await
}

async fn set_request(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    let request: AbstractRequest = parse(&body)?;
    run(e, move |e| e.set_request(&id, request)).await
}

async fn invoke(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    let request: Request = parse(&body)?;
    dispatch(e, id, request).await
}

async fn dispatch(e: Arc<Engine>, id: String, request: Request) -> Reply {
    run(e, move |e| e.invoke(&id, request)).await
}

#[derive(Deserialize)]
struct PlanQuery {
    #[serde(default = "one")]
    k: usize,
    resume: Option<String>,
    #[serde(default)]
    restart: bool,
}

fn one() -> usize {
    1
}

async fn plan(State(e): State<Arc<Engine>>, Path(id): Path<String>, Query(q): Query<PlanQuery>) -> Reply {
    dispatch(
        e,
        id,
        Request::Plan {
            k: q.k,
            resume: q.resume,
            restart: q.restart,
        },
    )
    .await
}

#[derive(Deserialize)]
struct PairQuery {
    producer: String,
    consumer: String,
}

async fn consolidations(State(e): State<Arc<Engine>>, Path(id): Path<String>, Query(q): Query<PairQuery>) -> Reply {
    dispatch(
        e,
        id,
        Request::SuggestConsolidations {
            producer: q.producer,
            consumer: q.consumer,
        },
    )
    .await
}

async fn suggestions(State(e): State<Arc<Engine>>, Path((id, kind)): Path<(String, String)>) -> Reply {
    let request = match kind.as_str() {
        "ordering" => Request::SuggestOrderings,
        "insertion" => Request::SuggestInsertions,
        "removal" => Request::SuggestRemovals,
        "relaxation" => Request::Relax,
        other => return Err(malformed(format!("unknown suggestion kind '{other}'"))),
    };
    dispatch(e, id, request).await
}

async fn verify(State(e): State<Arc<Engine>>, Path((id, scope)): Path<(String, String)>) -> Reply {
    let request = match scope.as_str() {
        "dataflow" => Request::VerifyDataflow,
        "controlflow" => Request::VerifyControlflow,
        "all" => Request::Verify,
        other => return Err(malformed(format!("unknown verification '{other}'"))),
    };
    dispatch(e, id, request).await
}

async fn complete(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    dispatch(e, id, Request::CompleteDataflow).await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConflictBody {
    service: String,
    #[serde(default)]
    outcome: Option<String>,
    position: Placement,
}

async fn conflicts(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    let b: ConflictBody = parse(&body)?;
    dispatch(
        e,
        id,
        Request::DetectConflicts {
            service: b.service,
            outcome: b.outcome,
            position: b.position,
        },
    )
    .await
}

async fn discover(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    let query: DiscoveryQuery = parse(&body)?;
    dispatch(e, id, Request::Discover { query }).await
}

#[derive(Deserialize)]
struct ProducerQuery {
    class: Option<String>,
    status: Option<String>,
}

async fn producers(State(e): State<Arc<Engine>>, Path(id): Path<String>, Query(q): Query<ProducerQuery>) -> Reply {
    let target = match (q.class, q.status) {
        (Some(c), None) => Target::Class(ClassRef::new(c)),
        (None, Some(s)) => Target::Status(StatusPattern::new(s)),
        _ => return Err(malformed("give exactly one of 'class' or 'status'")),
    };
    dispatch(e, id, Request::Producers { target }).await
}

#[derive(Deserialize)]
struct SuccessorQuery {
    service: String,
}

async fn successors(State(e): State<Arc<Engine>>, Path(id): Path<String>, Query(q): Query<SuccessorQuery>) -> Reply {
    dispatch(e, id, Request::Successors { service: q.service }).await
}

async fn apply(State(e): State<Arc<Engine>>, Path((id, sid)): Path<(String, String)>) -> Reply {
    dispatch(e, id, Request::ApplySuggestion { id: sid }).await
}

async fn dismiss(State(e): State<Arc<Engine>>, Path((id, sid)): Path<(String, String)>) -> Reply {
    dispatch(e, id, Request::DismissSuggestion { id: sid }).await
}

async fn undo(State(e): State<Arc<Engine>>, Path(id): Path<String>) -> Reply {
    dispatch(e, id, Request::Undo).await
}

async fn edit(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    let delta: Delta = parse(&body)?;
    dispatch(e, id, Request::EditProcess { delta }).await
}

async fn export(State(e): State<Arc<Engine>>, Path(id): Path<String>, Query(q): Query<FormatQuery>) -> Reply {
    let format: ExportFormat = q.format.as_deref().unwrap_or("profile-bundle").parse()?;
    run(e, move |e| {
        let text = e.export(&id, format)?;
        serde_json::from_str::<Value>(&text).map_err(|err| EngineError::Storage(err.to_string()))
    })
    .await
}

async fn import(State(e): State<Arc<Engine>>, Path(id): Path<String>, body: String) -> Reply {
    run(e, move |e| e.import(&id, &body)).await
}

/// Every route of the wire API.
pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/ontologies", post(load_ontology))
        .route("/ontologies/classify", post(classify))
        .route("/services", get(list_services).post(register))
        .route("/services/{id}", get(get_service).delete(deregister))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/request", put(set_request))
        .route("/sessions/{id}/invoke", post(invoke))
        .route("/sessions/{id}/plan", post(plan))
        .route("/sessions/{id}/discover", post(discover))
        .route("/sessions/{id}/producers", get(producers))
        .route("/sessions/{id}/successors", get(successors))
        .route("/sessions/{id}/suggestions/consolidation", post(consolidations))
        .route("/sessions/{id}/suggestions/{kind}", post(suggestions))
        .route("/sessions/{id}/suggestions/{sid}/apply", post(apply))
        .route("/sessions/{id}/pending/{sid}", delete(dismiss))
        .route("/sessions/{id}/complete/dataflow", post(complete))
        .route("/sessions/{id}/verify/{scope}", get(verify))
        .route("/sessions/{id}/conflicts", post(conflicts))
        .route("/sessions/{id}/undo", post(undo))
        .route("/sessions/{id}/edit", post(edit))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/import", post(import))
        .with_state(engine)
}

/// Serves until interrupted.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
