//! Advisory operations over a user's partial composite process:
//! suggestions, completion and verification.
//!
//! Nothing here mutates a process except [`complete_dataflow`], which
//! returns the delta it applied. Every suggestion carries the hash of the
//! state it was computed on so a late application can be refused.

mod analysis;
mod control;
mod dataflow;
mod gaps;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use analysis::{analyze, Analysis, Gap};
pub use control::{detect_conflicts, suggest_orderings, suggest_removals, verify_controlflow, ConflictReport};
pub use dataflow::{complete_dataflow, suggest_consolidations, verify_dataflow, DataflowCompletion};
pub use gaps::{adopt_plan, suggest_insertions, suggest_relaxations, unreachable_goals};

use crate::ontology::OntologyStore;
use crate::planner::{hex, AbstractRequest};
use crate::process::{CompositeProcess, Consolidation, Delta, StepId};
use crate::registry::{Registry, Score};

/// Read-only view of the engine state an assist call works on.
#[derive(Clone, Copy)]
pub struct Catalog<'a> {
    pub registry: &'a Registry,
    pub ontology: &'a OntologyStore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    TypeMismatch,
    UnboundInput,
    UnsatisfiedPrecondition,
    MutexConflict,
    DanglingStep,
    WeakMatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "at")]
pub enum Location {
    Process,
    Step { step: StepId },
    Input { step: StepId, input: String },
    Precondition { step: StepId, class: String },
    Consolidation(Consolidation),
    Pair { first: StepId, second: StepId },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub kind: DiagnosticKind,
    pub location: Location,
    pub explanation: String,
}

impl Diagnostic {
    pub fn error(kind: DiagnosticKind, location: Location, explanation: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            kind,
            location,
            explanation: explanation.into(),
        }
    }

    pub fn warning(kind: DiagnosticKind, location: Location, explanation: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            kind,
            location,
            explanation: explanation.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Errors among `diagnostics` whose kind is in `kinds`.
pub fn error_count(diagnostics: &[Diagnostic], kinds: &[DiagnosticKind]) -> usize {
    diagnostics
        .iter()
        .filter(|d| d.is_error() && kinds.contains(&d.kind))
        .count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    Consolidation,
    Ordering,
    Insertion,
    Removal,
    Relaxation,
}

impl SuggestionKind {
    pub const ALL: [SuggestionKind; 5] = [
        SuggestionKind::Consolidation,
        SuggestionKind::Ordering,
        SuggestionKind::Insertion,
        SuggestionKind::Removal,
        SuggestionKind::Relaxation,
    ];

    /// Error kinds a suggestion of this kind targets by default.
    /// Relaxations target unreachable goals, which are not process
    /// diagnostics.
    pub fn addresses(self) -> &'static [DiagnosticKind] {
        match self {
            SuggestionKind::Consolidation => &[DiagnosticKind::TypeMismatch],
            SuggestionKind::Ordering => &[DiagnosticKind::UnsatisfiedPrecondition, DiagnosticKind::MutexConflict],
            SuggestionKind::Insertion => &[DiagnosticKind::UnsatisfiedPrecondition],
            SuggestionKind::Removal => &[DiagnosticKind::DanglingStep],
            SuggestionKind::Relaxation => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    /// An edit to the process.
    Delta(Delta),
    /// A revised request.
    Request(AbstractRequest),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: String,
    pub kind: SuggestionKind,
    pub payload: Payload,
    pub justification: String,
    pub score: Score,
    #[serde(default)]
    pub weak: bool,
    /// Error kinds this suggestion must not increase.
    pub addresses: Vec<DiagnosticKind>,
    /// Hash of the process (or, for relaxations, the request) it was
    /// computed against.
    pub basis: String,
}

impl Suggestion {
    pub(crate) fn new(kind: SuggestionKind, payload: Payload, justification: String, score: Score, basis: String) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&(kind, &payload, &basis)).expect("suggestion serializes"));
        let id = hex(&hasher.finalize()[..8]);
        Self {
            id,
            kind,
            payload,
            justification,
            score,
            weak: false,
            addresses: kind.addresses().to_vec(),
            basis,
        }
    }

    pub fn delta(&self) -> Option<&Delta> {
        match &self.payload {
            Payload::Delta(d) => Some(d),
            Payload::Request(_) => None,
        }
    }

    /// Whether the suggestion was computed against this state.
    pub fn is_current(&self, process: &CompositeProcess, request: Option<&AbstractRequest>) -> bool {
        match self.payload {
            Payload::Delta(_) => self.basis == process.content_hash(),
            Payload::Request(_) => request.is_some_and(|r| r.hash() == self.basis),
        }
    }
}

/// Best suggestions first, then by id for determinism.
pub(crate) fn sort_suggestions(list: &mut [Suggestion]) {
    list.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
}

/// Drops process suggestions that fail to apply or would increase the
/// errors they target.
pub(crate) fn retain_sound(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
    list: &mut Vec<Suggestion>,
) -> Result<(), crate::error::AssistError> {
    let before = verify_all(process, request, catalog)?;
    let mut kept = Vec::with_capacity(list.len());
    for s in list.drain(..) {
        let Some(delta) = s.delta() else {
            kept.push(s);
            continue;
        };
        let mut next = process.clone();
        if next.apply(delta, Some(catalog.registry)).is_err() {
            continue;
        }
        let after = verify_all(&next, request, catalog)?;
        if error_count(&after, &s.addresses) <= error_count(&before, &s.addresses) {
            kept.push(s);
        }
    }
    *list = kept;
    Ok(())
}

/// Both process verifications together.
pub fn verify_all(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<Vec<Diagnostic>, crate::error::AssistError> {
    let mut out = verify_dataflow(process, request, catalog);
    out.extend(verify_controlflow(process, request, catalog)?);
    out.sort();
    out.dedup();
    Ok(out)
}
