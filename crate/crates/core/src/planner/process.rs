//! Turning a layered plan into an editable composite process.

use crate::error::PlanError;
use crate::ontology::OntologyStore;
use crate::process::{CompositeProcess, Consolidation, ConsolidationEntry, Construct, Provenance, Step, StepId};
use crate::registry::Registry;

use super::Plan;

/// Builds a sequence of layers (a layer with several steps becomes a
/// parallel block) and links every input to an output of an earlier layer
/// when one matches safely: nearest layer first, then best degree.
pub fn plan_to_process(plan: &Plan, registry: &Registry, ontology: &OntologyStore) -> Result<CompositeProcess, PlanError> {
    let mut process = CompositeProcess::default();
    let mut layer_ids: Vec<Vec<StepId>> = Vec::with_capacity(plan.layers.len());
    for layer in &plan.layers {
        let mut ids = Vec::with_capacity(layer.len());
        for ps in layer {
            if !registry.contains(&ps.service) {
                return Err(PlanError::DanglingService(ps.service.clone()));
            }
            let id = process.fresh_step_id(&ps.service);
            process.steps.insert(
                id.clone(),
                Step {
                    service: ps.service.clone(),
                    outcome: Some(ps.outcome.clone()),
                    provenance: Provenance::AutoCompleted,
                },
            );
            ids.push(id);
        }
        layer_ids.push(ids);
    }

    let blocks: Vec<Construct> = layer_ids
        .iter()
        .filter(|ids| !ids.is_empty())
        .map(|ids| Construct::Parallel(ids.iter().map(|id| Construct::step(id)).collect()))
        .collect();
    process.control = Construct::Sequence(blocks).normalized();

    for (j, consumers) in layer_ids.iter().enumerate() {
        for consumer in consumers {
            let cprof = registry.get(&process.steps[consumer].service).expect("checked");
            for input in &cprof.inputs {
                let mut best = None;
                for (i, producers) in layer_ids[..j].iter().enumerate() {
                    for producer in producers {
                        let pprof = registry.get(&process.steps[producer].service).expect("checked");
                        for output in &pprof.outputs {
                            let m = ontology.match_degree(&output.ty, &input.ty)?;
                            if !m.degree.is_safe() {
                                continue;
                            }
                            // Later layers sort first; ties go to the lexically first step.
                            let key = (usize::MAX - i, m.rank_key(), producer.clone(), output.name.clone());
                            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                                best = Some((key, (producer.clone(), output.name.clone())));
                            }
                        }
                    }
                }
                if let Some((_, (producer, output))) = best {
                    process.consolidations.push(ConsolidationEntry {
                        link: Consolidation {
                            producer,
                            output,
                            consumer: consumer.clone(),
                            input: input.name.clone(),
                        },
                        provenance: Provenance::AutoCompleted,
                    });
                }
            }
        }
    }
    process
        .consolidations
        .sort_by(|a, b| (&a.link.consumer, &a.link.input).cmp(&(&b.link.consumer, &b.link.input)));
    Ok(process)
}
