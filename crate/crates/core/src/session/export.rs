//! Process export and import.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assist::{verify_all, Catalog, Diagnostic};
use crate::error::EngineError;
use crate::planner::AbstractRequest;
use crate::process::CompositeProcess;
use crate::registry::{Binding, ConditionalEffect, Param, ProfileBundle, ServiceProfile, StatusPattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    /// The composite as a registrable profile plus the process itself.
    ProfileBundle,
    /// The process, the request and the current diagnostics.
    PlanReport,
}

impl FromStr for ExportFormat {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "profile-bundle" => Ok(ExportFormat::ProfileBundle),
            "plan-report" => Ok(ExportFormat::PlanReport),
            other => Err(EngineError::Malformed(format!("unknown export format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReport {
    pub request: Option<AbstractRequest>,
    pub process: CompositeProcess,
    pub process_hash: String,
    pub diagnostics: Vec<Diagnostic>,
    pub errors: usize,
}

fn rebind(pattern: &StatusPattern, profile: &ServiceProfile) -> StatusPattern {
    let mut out = pattern.clone();
    for b in out.bindings.values_mut() {
        if let Binding::Param(n) = b {
            if let Some(p) = profile.param(n) {
                *b = Binding::Type(p.ty.clone());
            }
        }
    }
    out
}

/// The composite seen as a single service: inputs no step is fed for,
/// outputs nothing inside consumes, preconditions no step establishes,
/// and the combined effect of the assumed outcomes.
pub fn composite_profile(id: &str, process: &CompositeProcess, catalog: Catalog<'_>) -> ServiceProfile {
    let mut profile = ServiceProfile::new(id);
    let mut adds = Vec::new();
    let mut deletes = Vec::new();
    let mut pre = Vec::new();
    for (sid, step) in &process.steps {
        let Some(p) = catalog.registry.get(&step.service) else { continue };
        for i in &p.inputs {
            if process.feeding(sid, &i.name).is_none() {
                profile.inputs.push(Param::new(format!("{sid}.{}", i.name), i.ty.clone()));
            }
        }
        for o in &p.outputs {
            let consumed = process
                .consolidations
                .iter()
                .any(|c| c.link.producer == *sid && c.link.output == o.name);
            if !consumed {
                profile.outputs.push(Param::new(format!("{sid}.{}", o.name), o.ty.clone()));
            }
        }
        pre.extend(p.preconditions.iter().map(|c| rebind(c, p)));
        let effect = match &step.outcome {
            Some(o) => p.effect_named(o),
            None if p.effects.len() == 1 => p.effects.first(),
            None => None,
        };
        if let Some(e) = effect {
            adds.extend(e.adds.iter().map(|a| rebind(a, p)));
            deletes.extend(e.deletes.iter().map(|d| rebind(d, p)));
        }
    }
    let adds: BTreeSet<StatusPattern> = adds.into_iter().collect();
    let deletes: BTreeSet<StatusPattern> = deletes.into_iter().filter(|d| !adds.contains(d)).collect();
    profile.preconditions = pre
        .into_iter()
        .filter(|c| !adds.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut effect = ConditionalEffect::new(crate::registry::DEFAULT_EFFECT);
    effect.adds = adds.into_iter().collect();
    effect.deletes = deletes.into_iter().collect();
    profile.effects.push(effect);
    profile
}

/// Deterministic JSON rendering of `process` in `format`.
pub fn export_process(
    process: &CompositeProcess,
    request: Option<&AbstractRequest>,
    format: ExportFormat,
    catalog: Catalog<'_>,
) -> Result<String, EngineError> {
    let text = match format {
        ExportFormat::ProfileBundle => {
            if process.is_empty() {
                return Err(EngineError::EmptyProcess);
            }
            let hash = process.content_hash();
            let id = format!("composite-{}", &hash[..12]);
            let bundle = ProfileBundle {
                services: vec![composite_profile(&id, process, catalog)],
                process: Some(process.clone()),
            };
            serde_json::to_string_pretty(&bundle)
        }
        ExportFormat::PlanReport => {
            let diagnostics = verify_all(process, request, catalog)?;
            let report = PlanReport {
                request: request.cloned(),
                process: process.clone(),
                process_hash: process.content_hash(),
                errors: diagnostics.iter().filter(|d| d.is_error()).count(),
                diagnostics,
            };
            serde_json::to_string_pretty(&report)
        }
    };
    Ok(text.expect("export serializes"))
}

/// The process inside an exported profile bundle.
pub fn import_process(document: &str) -> Result<CompositeProcess, EngineError> {
    let bundle: ProfileBundle = serde_json::from_str(document).map_err(|e| EngineError::Malformed(e.to_string()))?;
    let process = bundle
        .process
        .ok_or_else(|| EngineError::Malformed("bundle carries no process".into()))?;
    process.validate(None)?;
    Ok(process)
}
