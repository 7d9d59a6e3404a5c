//! C ABI over the composition engine.
//!
//! Every call takes an opaque [`SemEngine`] handle and JSON strings, and
//! returns a [`SemStatus`]. Results are written to `out` as a JSON string
//! the caller releases with [`sem_string_free`]. On failure `out` receives
//! `{"error": kind, "message": text}` instead, when `out` is not null.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use semcompose::error::EngineError;
use semcompose::ontology::OntologyFormat;
use semcompose::planner::AbstractRequest;
use semcompose::registry::parse_profiles;
use semcompose::session::{Engine, ExportFormat, Request};
use serde_json::{json, Value};

/// Result codes. `SEM_STATUS_OK` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SemStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Unparseable JSON or ontology text.
    Malformed = 3,
    /// Unknown session, service, suggestion or step.
    NotFound = 4,
    /// Duplicate id, conflicting declaration or token mismatch.
    Conflict = 5,
    /// The suggestion no longer matches the session.
    Stale = 6,
    /// Well-formed input the engine refuses.
    Invalid = 7,
    Internal = 8,
}

/// Opaque engine handle.
pub struct SemEngine {
    inner: Engine,
}

fn status_of(e: &EngineError) -> SemStatus {
    match e.kind() {
        "unknown_session" | "unknown_suggestion" | "unknown_service" | "unknown_step" => SemStatus::NotFound,
        "stale_suggestion" => SemStatus::Stale,
        "duplicate" | "conflict" | "token_mismatch" => SemStatus::Conflict,
        "malformed" | "parse" | "malformed_token" => SemStatus::Malformed,
        "storage" => SemStatus::Internal,
        _ => SemStatus::Invalid,
    }
}

struct Failure(SemStatus, Value);

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        Failure(status_of(&e), json!({ "error": e.kind(), "message": e.to_string() }))
    }
}

fn malformed(what: impl std::fmt::Display) -> Failure {
    Failure(SemStatus::Malformed, json!({ "error": "malformed", "message": what.to_string() }))
}

unsafe fn arg<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(
            SemStatus::NullArgument,
            json!({ "error": "null_argument", "message": "required argument is null" }),
        ));
    }
    CStr::from_ptr(p).to_str().map_err(|e| {
        Failure(
            SemStatus::InvalidUtf8,
            json!({ "error": "invalid_utf8", "message": e.to_string() }),
        )
    })
}

unsafe fn opt_arg<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        arg(p).map(Some)
    }
}

fn parse<T: for<'de> serde::Deserialize<'de>>(text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(malformed)
}

unsafe fn write_out(out: *mut *mut c_char, value: &Value) {
    if out.is_null() {
        return;
    }
    let text = match value {
        Value::String(s) => s.clone(),
        v => v.to_string(),
    };
    *out = CString::new(text).map_or(ptr::null_mut(), CString::into_raw);
}

/// Runs `f` against the engine, writing its result or error to `out`.
unsafe fn call(
    engine: *const SemEngine,
    out: *mut *mut c_char,
    f: impl FnOnce(&Engine) -> Result<Value, Failure>,
) -> SemStatus {
    if !out.is_null() {
        *out = ptr::null_mut();
    }
    let result = match engine.as_ref() {
        None => Err(Failure(
            SemStatus::NullArgument,
            json!({ "error": "null_argument", "message": "engine handle is null" }),
        )),
        Some(e) => catch_unwind(AssertUnwindSafe(|| f(&e.inner))).unwrap_or_else(|_| {
            Err(Failure(
                SemStatus::Internal,
                json!({ "error": "internal", "message": "engine panicked" }),
            ))
        }),
    };
    match result {
        Ok(v) => {
            write_out(out, &v);
            SemStatus::Ok
        }
        Err(Failure(status, v)) => {
            write_out(out, &v);
            status
        }
    }
}

fn to_value<T: serde::Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("engine output serializes")
}

/// Creates an empty in-memory engine. Release it with [`sem_engine_free`].
#[no_mangle]
pub extern "C" fn sem_engine_new() -> *mut SemEngine {
    Box::into_raw(Box::new(SemEngine { inner: Engine::new() }))
}

/// # Safety
/// `engine` must come from [`sem_engine_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sem_engine_free(engine: *mut SemEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// # Safety
/// `s` must be a string returned through an `out` argument, freed once.
#[no_mangle]
pub unsafe extern "C" fn sem_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an ontology document. `format` is "triples", "structured" or null
/// to detect it.
///
/// # Safety
/// Pointers must be null or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sem_load_ontology(
    engine: *const SemEngine,
    document: *const c_char,
    format: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| {
        let doc = arg(document)?;
        let format = match opt_arg(format)? {
            None => None,
            Some("triples") => Some(OntologyFormat::Triples),
            Some("structured") => Some(OntologyFormat::Structured),
            Some(other) => return Err(malformed(format!("unknown ontology format '{other}'"))),
        };
        Ok(to_value(e.load_ontology(doc, format)?))
    })
}

/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_classify(engine: *const SemEngine, out: *mut *mut c_char) -> SemStatus {
    call(engine, out, |e| Ok(to_value(e.classify()?)))
}

/// Registers a profile, an array of profiles or a bundle, all or nothing.
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_register(
    engine: *const SemEngine,
    profiles: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| {
        let list = parse_profiles(arg(profiles)?).map_err(malformed)?;
        Ok(to_value(e.register(list)?))
    })
}

/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_deregister(
    engine: *const SemEngine,
    service_id: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| Ok(to_value(e.deregister(arg(service_id)?)?)))
}

/// Writes the new session id (a bare string) to `out`.
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_session_new(engine: *const SemEngine, out: *mut *mut c_char) -> SemStatus {
    call(engine, out, |e| Ok(Value::String(e.create_session()?)))
}

/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_session_view(
    engine: *const SemEngine,
    session: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| Ok(to_value(e.session(arg(session)?)?)))
}

/// Sets or revises the session's abstract request.
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_set_request(
    engine: *const SemEngine,
    session: *const c_char,
    request: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| {
        let r: AbstractRequest = parse(arg(request)?)?;
        Ok(to_value(e.set_request(arg(session)?, r)?))
    })
}

/// Runs one session verb, e.g. `{"verb": "plan", "k": 2}`, and writes the
/// response document.
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_invoke(
    engine: *const SemEngine,
    session: *const c_char,
    request: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| {
        let r: Request = parse(arg(request)?)?;
        Ok(to_value(e.invoke(arg(session)?, r)?))
    })
}

/// Exports the session's process. `format` is "profile-bundle" or
/// "plan-report".
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_export(
    engine: *const SemEngine,
    session: *const c_char,
    format: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| {
        let format: ExportFormat = arg(format)?.parse().map_err(malformed)?;
        Ok(Value::String(e.export(arg(session)?, format)?))
    })
}

/// Replaces the session's process with an exported one.
///
/// # Safety
/// See [`sem_load_ontology`].
#[no_mangle]
pub unsafe extern "C" fn sem_import(
    engine: *const SemEngine,
    session: *const c_char,
    document: *const c_char,
    out: *mut *mut c_char,
) -> SemStatus {
    call(engine, out, |e| Ok(to_value(e.import(arg(session)?, arg(document)?)?)))
}
