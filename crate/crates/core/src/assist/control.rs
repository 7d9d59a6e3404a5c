//! Control-flow verification, ordering suggestions and conflict detection.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::analysis::{analyze, Analysis};
use super::{
    retain_sound, sort_suggestions, Catalog, Diagnostic, DiagnosticKind, Location, Payload, Suggestion, SuggestionKind,
};
use crate::error::AssistError;
use crate::planner::{AbstractRequest, ActId};
use crate::process::{CompositeProcess, Construct, Delta, EditOp, Placement, Provenance, Step};
use crate::registry::Score;

/// Simulates the control tree from the request's initial state.
pub fn verify_controlflow(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<Vec<Diagnostic>, AssistError> {
    Ok(analyze(process, request, catalog, &[])?.diagnostics)
}

fn control_suggestion(process: &CompositeProcess, to: Construct, justification: String) -> Suggestion {
    let delta = Delta {
        ops: vec![EditOp::ReplaceControl {
            from: process.control.clone(),
            to: Some(to),
        }],
    };
    Suggestion::new(
        SuggestionKind::Ordering,
        Payload::Delta(delta),
        justification,
        Score::default(),
        process.content_hash(),
    )
}

fn names(c: &Construct) -> String {
    c.leaves()
        .iter()
        .map(|s| format!("'{s}'"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Sequencing for concurrent steps where one feeds the other, and
/// parallelism for adjacent sequenced blocks with no dependency or conflict.
pub fn suggest_orderings(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<Vec<Suggestion>, AssistError> {
    let Some(root) = &process.control else {
        return Ok(Vec::new());
    };
    let an = analyze(process, request, catalog, &[])?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for x in process.steps.keys() {
        for y in process.steps.keys() {
            if x == y || !root.concurrent(x, y) || !an.depends(process, x, y) || an.depends(process, y, x) {
                continue;
            }
            let (lca, ix, iy) = root.split(x, y).expect("concurrent steps split");
            let Some(to) = root.replaced_at(&lca, |node| {
                let children = node.children();
                let mut kept: Vec<Construct> = Vec::with_capacity(children.len() - 1);
                for (i, c) in children.iter().enumerate() {
                    if i == ix.min(iy) {
                        kept.push(Construct::Sequence(vec![children[ix].clone(), children[iy].clone()]));
                    } else if i != ix.max(iy) {
                        kept.push(c.clone());
                    }
                }
                Construct::Parallel(kept)
            }) else {
                continue;
            };
            if seen.insert(to.clone()) {
                out.push(control_suggestion(
                    process,
                    to,
                    format!("'{y}' uses what '{x}' produces but may run at the same time; run '{x}' first"),
                ));
            }
        }
    }
    let mut sequences = Vec::new();
    collect_sequences(root, &mut Vec::new(), &mut sequences);
    for path in sequences {
        let children = root.at(&path).children();
        for i in 0..children.len().saturating_sub(1) {
            let (a, b) = (&children[i], &children[i + 1]);
            let independent = a.leaves().iter().all(|x| {
                b.leaves()
                    .iter()
                    .all(|y| !an.depends(process, x, y) && an.steps_conflict(x, y).is_none())
            });
            if !independent {
                continue;
            }
            let Some(to) = root.replaced_at(&path, |node| {
                let mut kept = node.children().to_vec();
                let pair = Construct::Parallel(vec![kept[i].clone(), kept[i + 1].clone()]);
                kept.splice(i..=i + 1, [pair]);
                Construct::Sequence(kept)
            }) else {
                continue;
            };
            if seen.insert(to.clone()) {
                out.push(control_suggestion(
                    process,
                    to,
                    format!(
                        "{} and {} share no data or status dependency and do not conflict; they can run in parallel",
                        names(a),
                        names(b)
                    ),
                ));
            }
        }
    }
    retain_sound(process, request, catalog, &mut out)?;
    sort_suggestions(&mut out);
    Ok(out)
}

fn collect_sequences(c: &Construct, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if matches!(c, Construct::Sequence(_)) {
        out.push(path.clone());
    }
    for (i, child) in c.children().iter().enumerate() {
        path.push(i);
        collect_sequences(child, path, out);
        path.pop();
    }
}

/// Removal of steps whose service or assumed outcome no longer exists.
pub fn suggest_removals(process: &CompositeProcess, catalog: Catalog<'_>) -> Result<Vec<Suggestion>, AssistError> {
    let basis = process.content_hash();
    let mut out = Vec::new();
    for (id, step) in &process.steps {
        let reason = match catalog.registry.get(&step.service) {
            None => format!("step '{id}' refers to unregistered service '{}'", step.service),
            Some(p) => match &step.outcome {
                Some(o) if p.effect_named(o).is_none() => {
                    format!("service '{}' no longer has outcome '{o}'", step.service)
                }
                _ => continue,
            },
        };
        let delta = process.remove_step_delta(id)?;
        out.push(Suggestion::new(
            SuggestionKind::Removal,
            Payload::Delta(delta),
            format!("{reason}; remove it"),
            Score::default(),
            basis.clone(),
        ));
    }
    sort_suggestions(&mut out);
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub diagnostics: Vec<Diagnostic>,
    pub suggestions: Vec<Suggestion>,
}

/// Which of two conflicting actions damages the other: `(x hurts y, y hurts x)`.
fn harm(an: &Analysis, x: &[ActId], y: &[ActId]) -> (bool, bool) {
    let d = &an.domain;
    let hurts = |a: ActId, b: ActId| {
        let (a, b) = (d.action(a), d.action(b));
        a.dels.iter().any(|p| {
            b.adds.contains(p) || b.needs.iter().any(|&r| d.requirement(r).supporters.contains(p))
        })
    };
    let xy = x.iter().any(|&a| y.iter().any(|&b| hurts(a, b)));
    let yx = x.iter().any(|&a| y.iter().any(|&b| hurts(b, a)));
    (xy, yx)
}

fn candidate_conflicts(
    process: &CompositeProcess,
    id: &str,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<(Analysis, Vec<(String, String)>), AssistError> {
    let an = analyze(process, request, catalog, &[])?;
    let root = process.control.as_ref().expect("candidate placed");
    let found = process
        .steps
        .keys()
        .filter(|y| y.as_str() != id && root.concurrent(id, y))
        .filter_map(|y| an.steps_conflict(id, y).map(|r| (y.clone(), r)))
        .collect();
    Ok((an, found))
}

/// Mutex relations between a candidate placed at `position` and the steps
/// it would run alongside, with single-move sequencing resolutions.
pub fn detect_conflicts(
    process: &CompositeProcess,
    candidate: &str,
    outcome: Option<&str>,
    position: &Placement,
    request: Option<&AbstractRequest>,
    catalog: Catalog<'_>,
) -> Result<ConflictReport, AssistError> {
    let profile = catalog
        .registry
        .get(candidate)
        .ok_or_else(|| AssistError::UnknownService(candidate.to_string()))?;
    if let Some(o) = outcome {
        if profile.effect_named(o).is_none() {
            return Err(AssistError::InvalidProcess(format!("service '{candidate}' has no outcome '{o}'")));
        }
    }
    let id = process.fresh_step_id(candidate);
    let step = Step {
        service: candidate.to_string(),
        outcome: outcome.map(str::to_string),
        provenance: Provenance::SuggestedAccepted,
    };
    let mut trial = process.clone();
    trial.apply(&process.insert_step_delta(&id, step.clone(), position)?, Some(catalog.registry))?;
    let (an, found) = candidate_conflicts(&trial, &id, request, catalog)?;

    let mut report = ConflictReport::default();
    let basis = process.content_hash();
    let mut seen = HashSet::new();
    for (y, reason) in &found {
        report.diagnostics.push(Diagnostic::error(
            DiagnosticKind::MutexConflict,
            Location::Step { step: y.clone() },
            format!("candidate '{candidate}' would conflict with '{y}': {reason}"),
        ));
        if process.steps[y].service == candidate {
            continue;
        }
        let (hurts_y, hurt_by_y) = harm(&an, &an.acts[&id], &an.acts[y]);
        let placement = match (hurts_y, hurt_by_y) {
            (true, false) => Placement::After(y.clone()),
            (false, true) => Placement::Before(y.clone()),
            _ => continue,
        };
        let delta = process.insert_step_delta(&id, step.clone(), &placement)?;
        let mut moved = process.clone();
        if moved.apply(&delta, Some(catalog.registry)).is_err() {
            continue;
        }
        let (_, left) = candidate_conflicts(&moved, &id, request, catalog)?;
        if !left.is_empty() || !seen.insert(placement.clone()) {
            continue;
        }
        let order = match &placement {
            Placement::After(_) => format!("run '{candidate}' after '{y}'"),
            _ => format!("run '{candidate}' before '{y}'"),
        };
        let mut s = Suggestion::new(
            SuggestionKind::Ordering,
            Payload::Delta(delta),
            format!("{order} instead: {reason}"),
            Score::default(),
            basis.clone(),
        );
        s.addresses = vec![DiagnosticKind::MutexConflict];
        report.suggestions.push(s);
    }
    report.diagnostics.sort();
    sort_suggestions(&mut report.suggestions);
    Ok(report)
}
