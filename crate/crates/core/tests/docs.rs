use std::collections::BTreeMap;

use semcompose::assist::{Diagnostic, Suggestion};
use semcompose::bench::BenchConfig;
use semcompose::planner::{AbstractRequest, Plan};
use semcompose::process::{CompositeProcess, Delta};
use semcompose::registry::{DiscoveryQuery, ServiceProfile};

/// First json block under each `## ` heading of the format reference.
fn examples() -> BTreeMap<String, String> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/formats.md")).unwrap();
    let mut out = BTreeMap::new();
    let mut heading = String::new();
    let mut block: Option<String> = None;
    for line in text.lines() {
        if let Some(h) = line.strip_prefix("## ") {
            heading = h.to_string();
        } else if line == "```json" {
            block = Some(String::new());
        } else if line == "```" {
            if let Some(b) = block.take() {
                out.entry(heading.clone()).or_insert(b);
            }
        } else if let Some(b) = block.as_mut() {
            b.push_str(line);
            b.push('\n');
        }
    }
    out
}

#[test]
fn documented_examples_deserialize() {
    let ex = examples();
    let get = |h: &str| ex.get(h).unwrap_or_else(|| panic!("no example under '{h}'")).as_str();
    serde_json::from_str::<ServiceProfile>(get("Service profile")).unwrap();
    serde_json::from_str::<DiscoveryQuery>(get("Discovery query")).unwrap();
    serde_json::from_str::<AbstractRequest>(get("Request")).unwrap();
    serde_json::from_str::<Plan>(get("Plan")).unwrap();
    let p: CompositeProcess = serde_json::from_str(get("Composite process")).unwrap();
    p.validate(None).unwrap();
    let d: Delta = serde_json::from_str(get("Delta")).unwrap();
    assert_eq!(d.ops.len(), 6);
    serde_json::from_str::<Suggestion>(get("Suggestion")).unwrap();
    serde_json::from_str::<Diagnostic>(get("Diagnostic")).unwrap();
    let c: BenchConfig = serde_json::from_str(get("Benchmark config")).unwrap();
    assert_eq!(c, BenchConfig { repetitions: 3, ..BenchConfig::full_scale() });
}
