//! Dataflow consolidation: suggesting, completing and checking the links
//! from producer outputs to consumer inputs.

use super::{sort_suggestions, Catalog, Diagnostic, DiagnosticKind, Location, Payload, Suggestion, SuggestionKind};
use crate::error::AssistError;
use crate::ontology::{ClassRef, Degree, MatchDegree, OntologyStore};
use crate::planner::AbstractRequest;
use crate::process::{CompositeProcess, Consolidation, ConsolidationEntry, Delta, EditOp, Provenance};
use crate::registry::{Param, Score};

fn chain(ontology: &OntologyStore, specific: &ClassRef, general: &ClassRef) -> String {
    match ontology.subclass_path(specific, general) {
        Some(path) => path.iter().map(ClassRef::as_str).collect::<Vec<_>>().join(" ⊑ "),
        None => format!("{specific} ⊑ {general}"),
    }
}

/// Why `output` may feed `input` at degree `d`.
pub(crate) fn justify(ontology: &OntologyStore, output: &Param, input: &Param, d: MatchDegree) -> String {
    match d.degree {
        Degree::Exact => format!(
            "output '{}' and input '{}' have the same type '{}'",
            output.name, input.name, output.ty
        ),
        Degree::Plugin => format!(
            "output '{}' is more specific than input '{}': {}",
            output.name,
            input.name,
            chain(ontology, &output.ty, &input.ty)
        ),
        Degree::Subsume => format!(
            "output '{}' is more general than input '{}' ({}); the value may not fit",
            output.name,
            input.name,
            chain(ontology, &input.ty, &output.ty)
        ),
        Degree::Fail => format!("types '{}' and '{}' are unrelated", output.ty, input.ty),
    }
}

fn consolidation_suggestion(
    ontology: &OntologyStore,
    basis: &str,
    link: Consolidation,
    output: &Param,
    input: &Param,
    d: MatchDegree,
) -> Suggestion {
    let justification = justify(ontology, output, input, d);
    let delta = Delta {
        ops: vec![EditOp::AddConsolidation(ConsolidationEntry {
            link,
            provenance: Provenance::SuggestedAccepted,
        })],
    };
    let mut s = Suggestion::new(
        SuggestionKind::Consolidation,
        Payload::Delta(delta),
        justification,
        Score::of([&d]),
        basis.to_string(),
    );
    s.weak = d.degree == Degree::Subsume;
    s
}

/// Candidate links from `producer`'s outputs to `consumer`'s unfed inputs.
/// Subsume-degree pairs are included and flagged weak.
pub fn suggest_consolidations(
    process: &CompositeProcess,
    producer: &str,
    consumer: &str,
    catalog: Catalog<'_>,
) -> Result<Vec<Suggestion>, AssistError> {
    let p = process
        .steps
        .get(producer)
        .ok_or_else(|| AssistError::UnknownStep(producer.to_string()))?;
    let c = process
        .steps
        .get(consumer)
        .ok_or_else(|| AssistError::UnknownStep(consumer.to_string()))?;
    let (Some(pp), Some(cp)) = (catalog.registry.get(&p.service), catalog.registry.get(&c.service)) else {
        return Ok(Vec::new());
    };
    if producer == consumer {
        return Ok(Vec::new());
    }
    let basis = process.content_hash();
    let mut out = Vec::new();
    for input in cp.inputs.iter().filter(|i| process.feeding(consumer, &i.name).is_none()) {
        for output in &pp.outputs {
            let d = catalog.ontology.match_degree_lenient(&output.ty, &input.ty);
            if d.degree == Degree::Fail {
                continue;
            }
            let link = Consolidation {
                producer: producer.to_string(),
                output: output.name.clone(),
                consumer: consumer.to_string(),
                input: input.name.clone(),
            };
            out.push(consolidation_suggestion(catalog.ontology, &basis, link, output, input, d));
        }
    }
    sort_suggestions(&mut out);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataflowCompletion {
    pub process: CompositeProcess,
    /// What was applied; empty when nothing changed.
    pub delta: Delta,
    pub applied: Vec<Suggestion>,
    /// Competing candidates for inputs with a tied best match, computed
    /// against the completed process.
    pub ambiguous: Vec<Suggestion>,
}

/// Links every unfed input whose best upstream candidate is strictly
/// better than the rest. Tied inputs are left for the user.
pub fn complete_dataflow(process: &CompositeProcess, catalog: Catalog<'_>) -> DataflowCompletion {
    let basis = process.content_hash();
    let mut applied = Vec::new();
    let mut ties = Vec::new();
    if let Some(root) = &process.control {
        for (cid, cstep) in &process.steps {
            let Some(cp) = catalog.registry.get(&cstep.service) else { continue };
            for input in cp.inputs.iter().filter(|i| process.feeding(cid, &i.name).is_none()) {
                let mut cands = Vec::new();
                for (pid, pstep) in &process.steps {
                    if !root.precedes(pid, cid) {
                        continue;
                    }
                    let Some(pp) = catalog.registry.get(&pstep.service) else { continue };
                    for output in &pp.outputs {
                        let d = catalog.ontology.match_degree_lenient(&output.ty, &input.ty);
                        if d.degree.is_safe() {
                            let link = Consolidation {
                                producer: pid.clone(),
                                output: output.name.clone(),
                                consumer: cid.clone(),
                                input: input.name.clone(),
                            };
                            cands.push((d, link, output, input));
                        }
                    }
                }
                cands.sort_by_key(|(d, ..)| d.rank_key());
                match cands.as_slice() {
                    [] => {}
                    [(d, link, o, i)] => applied.push((*d, link.clone(), *o, *i)),
                    [(d0, l0, o0, i0), (d1, ..), ..] if d0.rank_key() < d1.rank_key() => {
                        applied.push((*d0, l0.clone(), *o0, *i0))
                    }
                    [(d0, ..), ..] => {
                        let best = d0.rank_key();
                        ties.extend(cands.iter().filter(|(d, ..)| d.rank_key() == best).cloned());
                    }
                }
            }
        }
    }
    let delta = Delta {
        ops: applied
            .iter()
            .map(|(_, link, ..)| {
                EditOp::AddConsolidation(ConsolidationEntry {
                    link: link.clone(),
                    provenance: Provenance::AutoCompleted,
                })
            })
            .collect(),
    };
    let mut next = process.clone();
    next.apply(&delta, Some(catalog.registry))
        .expect("completion links distinct unfed inputs of existing steps");
    let applied = applied
        .into_iter()
        .map(|(d, link, o, i)| consolidation_suggestion(catalog.ontology, &basis, link, o, i, d))
        .collect();
    let next_basis = next.content_hash();
    let mut ambiguous: Vec<Suggestion> = ties
        .into_iter()
        .map(|(d, link, o, i)| consolidation_suggestion(catalog.ontology, &next_basis, link, o, i, d))
        .collect();
    sort_suggestions(&mut ambiguous);
    DataflowCompletion {
        process: next,
        delta,
        applied,
        ambiguous,
    }
}

/// Type checks on consolidations, plus inputs left unfed.
pub fn verify_dataflow(process: &CompositeProcess, request: Option<&AbstractRequest>, catalog: Catalog<'_>) -> Vec<Diagnostic> {
    let ontology = catalog.ontology;
    let mut out = Vec::new();
    for entry in &process.consolidations {
        let link = &entry.link;
        let profile = |id: &str| {
            process
                .steps
                .get(id)
                .and_then(|s| catalog.registry.get(&s.service))
        };
        let (Some(pp), Some(cp)) = (profile(&link.producer), profile(&link.consumer)) else {
            continue;
        };
        let loc = Location::Consolidation(link.clone());
        let (Some(output), Some(input)) = (
            pp.outputs.iter().find(|o| o.name == link.output),
            cp.inputs.iter().find(|i| i.name == link.input),
        ) else {
            out.push(Diagnostic::error(
                DiagnosticKind::TypeMismatch,
                loc,
                format!(
                    "{}.{} -> {}.{} names a parameter the services no longer have",
                    link.producer, link.output, link.consumer, link.input
                ),
            ));
            continue;
        };
        if !ontology.resolves(&output.ty) || !ontology.resolves(&input.ty) {
            out.push(Diagnostic::warning(
                DiagnosticKind::WeakMatch,
                loc,
                format!(
                    "cannot check '{}' against '{}': type unknown to the ontology",
                    output.ty, input.ty
                ),
            ));
            continue;
        }
        let d = ontology.match_degree_lenient(&output.ty, &input.ty);
        match d.degree {
            Degree::Fail => out.push(Diagnostic::error(
                DiagnosticKind::TypeMismatch,
                loc,
                format!(
                    "output '{}' ({}) cannot feed input '{}' ({}): the types are unrelated",
                    link.output, output.ty, link.input, input.ty
                ),
            )),
            Degree::Subsume => out.push(Diagnostic::warning(
                DiagnosticKind::WeakMatch,
                loc,
                justify(ontology, output, input, d),
            )),
            _ => {}
        }
    }
    let available: &[ClassRef] = request.map_or(&[], |r| &r.available_inputs);
    for (id, step) in &process.steps {
        let Some(profile) = catalog.registry.get(&step.service) else { continue };
        for input in &profile.inputs {
            if process.feeding(id, &input.name).is_some() {
                continue;
            }
            if available
                .iter()
                .any(|a| ontology.match_degree_lenient(a, &input.ty).degree.is_safe())
            {
                continue;
            }
            out.push(Diagnostic::warning(
                DiagnosticKind::UnboundInput,
                Location::Input {
                    step: id.clone(),
                    input: input.name.clone(),
                },
                format!("input '{}' of '{id}' is not fed by any step or request input", input.name),
            ));
        }
    }
    out.sort();
    out
}
