use std::fmt;

use thiserror::Error;

/// A syntax error in an ingested document, with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("'{0}' is declared both as a class and as a property")]
    ConflictingDeclaration(String),
    #[error("unknown class '{0}'")]
    UnknownClass(String),
    #[error("unknown property '{0}'")]
    UnknownProperty(String),
    #[error("ontology changed since the last classify (version {current}, classified {classified:?})")]
    StaleClosure {
        current: u64,
        classified: Option<u64>,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("service '{0}' is already registered")]
    DuplicateId(String),
    #[error("unknown service '{0}'")]
    UnknownService(String),
    #[error("invalid profile '{id}': {reason}")]
    InvalidProfile { id: String, reason: String },
    #[error("discovery query has no criteria")]
    EmptyQuery,
    #[error("cannot resolve target '{0}'")]
    UnresolvableTarget(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("request has no goals")]
    NoGoals,
    #[error("plan references unregistered service '{0}'")]
    DanglingService(String),
    #[error("continuation token does not match the current graph")]
    TokenMismatch,
    #[error("malformed continuation token: {0}")]
    MalformedToken(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssistError {
    #[error("unknown step '{0}'")]
    UnknownStep(String),
    #[error("unknown service '{0}'")]
    UnknownService(String),
    #[error("invalid process: {0}")]
    InvalidProcess(String),
    #[error("request is satisfiable; nothing to relax")]
    RequestSatisfiable,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Errors surfaced by the engine and session layer (and hence the wire API).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("session has no request set")]
    NoRequest,
    #[error("suggestion '{0}' is stale: the process changed since it was issued")]
    StaleSuggestion(String),
    #[error("unknown suggestion '{0}'")]
    UnknownSuggestion(String),
    #[error("nothing to undo")]
    EmptyHistory,
    #[error("process is empty")]
    EmptyProcess,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("storage error: {0}")]
    Storage(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Assist(#[from] AssistError),
}

impl EngineError {
    /// Stable machine-readable error kind used by the wire API and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            EngineError::UnknownSession(_) => "unknown_session",
            EngineError::NoRequest => "no_request",
            EngineError::StaleSuggestion(_) => "stale_suggestion",
            EngineError::UnknownSuggestion(_) => "unknown_suggestion",
            EngineError::EmptyHistory => "empty_history",
            EngineError::EmptyProcess => "empty_process",
            EngineError::Malformed(_) => "malformed",
            EngineError::Storage(_) => "storage",
            EngineError::Ontology(OntologyError::Parse(_)) => "parse",
            EngineError::Ontology(OntologyError::ConflictingDeclaration(_)) => "conflict",
            EngineError::Ontology(OntologyError::StaleClosure { .. }) => "not_classified",
            EngineError::Ontology(_) => "unknown_class",
            EngineError::Registry(RegistryError::DuplicateId(_)) => "duplicate",
            EngineError::Registry(RegistryError::UnknownService(_)) => "unknown_service",
            EngineError::Registry(RegistryError::Ontology(OntologyError::StaleClosure { .. })) => {
                "not_classified"
            }
            EngineError::Registry(_) => "invalid",
            EngineError::Plan(PlanError::NoGoals) => "no_goals",
            EngineError::Plan(PlanError::TokenMismatch) => "token_mismatch",
            EngineError::Plan(PlanError::MalformedToken(_)) => "malformed_token",
            EngineError::Plan(PlanError::DanglingService(_)) => "unknown_service",
            EngineError::Plan(PlanError::Ontology(OntologyError::StaleClosure { .. })) => "not_classified",
            EngineError::Plan(PlanError::Ontology(_)) => "unknown_class",
            EngineError::Assist(AssistError::UnknownStep(_)) => "unknown_step",
            EngineError::Assist(AssistError::UnknownService(_)) => "unknown_service",
            EngineError::Assist(AssistError::RequestSatisfiable) => "precondition",
            EngineError::Assist(AssistError::Plan(PlanError::NoGoals)) => "no_goals",
            EngineError::Assist(_) => "invalid",
        }
    }
}

impl From<ParseError> for EngineError {
    fn from(e: ParseError) -> Self {
        EngineError::Ontology(OntologyError::Parse(e))
    }
}
