//! Benchmark harness: generate a domain, then time loading, classification
//! and request processing separately.

mod generate;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_domain, synthetic_ontology, GeneratedDomain, GeneratedRequest};

use crate::error::{OntologyError, PlanError, RegistryError};
use crate::ontology::{OntologyFormat, OntologyStore};
use crate::planner::{build_graph, extract_plans, Cursor, ExtractMode, GraphStats};
use crate::registry::{parse_profiles, ProfileBundle, Registry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticOntology {
    pub classes: usize,
    #[serde(default = "defaults::max_depth")]
    pub max_depth: usize,
    #[serde(default = "defaults::branching")]
    pub branching: usize,
    /// Chance that a class gets a second parent.
    #[serde(default = "defaults::extra_parent_rate")]
    pub extra_parent_rate: f64,
    /// Instance triples are added until the document reaches this size.
    #[serde(default)]
    pub target_triples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OntologySource {
    File { path: String },
    Synthetic(SyntheticOntology),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::request_inputs")]
    pub max_inputs: usize,
    #[serde(default = "defaults::request_goals")]
    pub max_goals: usize,
    /// Extra requests built to be unsatisfiable.
    #[serde(default)]
    pub unsatisfiable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub ontology: OntologySource,
    pub services: usize,
    #[serde(default)]
    pub service_seed: u64,
    #[serde(default = "defaults::params")]
    pub max_inputs: usize,
    #[serde(default = "defaults::params")]
    pub max_outputs: usize,
    pub requests: RequestSpec,
    #[serde(default = "defaults::plans")]
    pub plans_per_request: usize,
    #[serde(default = "defaults::repetitions")]
    pub repetitions: usize,
    /// Process requests on several threads; times are then wall-clock for
    /// the whole batch.
    #[serde(default)]
    pub parallel: bool,
    /// Upper bound when counting all minimal plans and all plans up to
    /// level-off; 0 skips the counts. Counting is not part of request time.
    #[serde(default = "defaults::count_cap")]
    pub count_cap: usize,
}

mod defaults {
    pub fn max_depth() -> usize {
        8
    }
    pub fn branching() -> usize {
        8
    }
    pub fn extra_parent_rate() -> f64 {
        0.1
    }
    pub fn request_inputs() -> usize {
        4
    }
    pub fn request_goals() -> usize {
        2
    }
    pub fn params() -> usize {
        5
    }
    pub fn plans() -> usize {
        3
    }
    pub fn repetitions() -> usize {
        3
    }
    pub fn count_cap() -> usize {
        100
    }
}

impl BenchConfig {
    /// The scale used by the acceptance check: about 50k triples and 1000
    /// services with up to 5 inputs and outputs.
    pub fn full_scale() -> Self {
        Self {
            ontology: OntologySource::Synthetic(SyntheticOntology {
                classes: 500,
                max_depth: 6,
                branching: 6,
                extra_parent_rate: 0.1,
                target_triples: 50_000,
                seed: 1,
            }),
            services: 1000,
            service_seed: 2,
            max_inputs: 5,
            max_outputs: 5,
            requests: RequestSpec {
                count: 6,
                seed: 3,
                max_inputs: 4,
                max_goals: 2,
                unsatisfiable: 1,
            },
            plans_per_request: 3,
            repetitions: 1,
            parallel: false,
            count_cap: 100,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let positive = [
            ("services", self.services),
            ("max_inputs", self.max_inputs),
            ("max_outputs", self.max_outputs),
            ("requests.count", self.requests.count),
            ("repetitions", self.repetitions),
        ];
        match positive.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(BenchError::Config(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }
}

/// Median with the observed range, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

impl Timing {
    pub fn of(samples: &[Duration]) -> Self {
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        if ms.is_empty() {
            return Self::default();
        }
        let mid = ms.len() / 2;
        let median_ms = if ms.len() % 2 == 1 {
            ms[mid]
        } else {
            (ms[mid - 1] + ms[mid]) / 2.0
        };
        Self {
            median_ms,
            min_ms: ms[0],
            max_ms: ms[ms.len() - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestResult {
    pub adversarial: bool,
    /// Plans returned for the timed request, at most `plans_per_request`.
    pub solutions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<SolutionCounts>,
    pub reachable: bool,
    pub time: Timing,
    pub graph: GraphStats,
}

/// Untimed plan counts. A count is exact only when extraction finished
/// before reaching `cap` or running out of search steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionCounts {
    pub minimal: usize,
    pub minimal_exact: bool,
    pub to_level_off: usize,
    pub to_level_off_exact: bool,
    pub cap: usize,
}

/// Search steps allowed per count.
pub const COUNT_BUDGET: u64 = 200_000;

impl SolutionCounts {
    fn cell(n: usize, exact: bool) -> String {
        if exact {
            n.to_string()
        } else {
            format!("{n}+")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub services: usize,
    pub triples: usize,
    pub classes: usize,
    pub loading: Timing,
    pub reasoning: Timing,
    pub requests: Vec<RequestResult>,
    pub parallel: bool,
    /// Wall time of the whole run, generation excluded.
    pub total_ms: f64,
}

impl BenchReport {
    /// One row per request: services, solutions, load_ms, reason_ms, request_ms.
    pub fn csv(&self) -> String {
        let mut out = String::from("services,solutions,load_ms,reason_ms,request_ms\n");
        for r in &self.requests {
            let _ = writeln!(
                out,
                "{},{},{:.1},{:.1},{:.1}",
                self.services, r.solutions, self.loading.median_ms, self.reasoning.median_ms, r.time.median_ms
            );
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{} services, {} triples, {} classes{}\n",
            self.services,
            self.triples,
            self.classes,
            if self.parallel { " (parallel requests)" } else { "" }
        );
        let _ = writeln!(
            out,
            "{:<18} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8} {:>10}",
            "services (sol.)", "loading ms", "reasoning ms", "request ms", "levels", "mutexes", "minimal", "level-off"
        );
        for r in &self.requests {
            let label = format!(
                "{} ({}){}",
                self.services,
                r.solutions,
                if r.adversarial { "*" } else { "" }
            );
            let (minimal, level_off) = match r.counts {
                Some(c) => (
                    SolutionCounts::cell(c.minimal, c.minimal_exact),
                    SolutionCounts::cell(c.to_level_off, c.to_level_off_exact),
                ),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{label:<18} {:>12.1} {:>12.1} {:>12.1} {:>8} {:>8} {minimal:>8} {level_off:>10}",
                self.loading.median_ms, self.reasoning.median_ms, r.time.median_ms, r.graph.levels, r.graph.mutex_pairs
            );
        }
        let _ = writeln!(
            out,
            "ranges (min..max ms): loading {:.1}..{:.1}, reasoning {:.1}..{:.1}; * = unsatisfiable by construction; N+ = count stopped early",
            self.loading.min_ms, self.loading.max_ms, self.reasoning.min_ms, self.reasoning.max_ms
        );
        out
    }
}

/// Loads the generated domain into fresh stores; the caller times it.
pub fn load_domain(domain: &GeneratedDomain, services_json: &str) -> Result<(OntologyStore, Registry), BenchError> {
    let mut ontology = OntologyStore::new();
    ontology.load(&domain.ontology, OntologyFormat::Triples)?;
    let mut registry = Registry::new();
    for p in parse_profiles(services_json).map_err(|e| BenchError::Io(e.to_string()))? {
        registry.register(p, &ontology)?;
    }
    Ok((ontology, registry))
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let domain = generate_domain(config)?;
    run_on(config, &domain)
}

/// Times an already generated domain.
pub fn run_on(config: &BenchConfig, domain: &GeneratedDomain) -> Result<BenchReport, BenchError> {
    let services_json = serde_json::to_string(&ProfileBundle {
        services: domain.services.clone(),
        process: None,
    })
    .expect("profiles serialize");
    let started = Instant::now();
    let mut load = Vec::new();
    let mut reason = Vec::new();
    let mut per_request: Vec<Vec<Duration>> = vec![Vec::new(); domain.requests.len()];
    let mut results: Vec<Option<RequestResult>> = vec![None; domain.requests.len()];
    let mut sizes = (0, 0);
    for _ in 0..config.repetitions {
        let t = Instant::now();
        let (mut ontology, registry) = load_domain(domain, &services_json)?;
        load.push(t.elapsed());
        let t = Instant::now();
        ontology.classify();
        reason.push(t.elapsed());
        sizes = (ontology.triple_count(), ontology.class_count());

        let first = load.len() == 1;
        let run_one = |i: usize| -> Result<(Duration, RequestResult), BenchError> {
            let g = &domain.requests[i];
            let t = Instant::now();
            let mut graph = build_graph(&g.request, &registry, &ontology)?;
            let ex = extract_plans(&mut graph, None, config.plans_per_request);
            let reachable = graph.goals_reachable();
            let elapsed = t.elapsed();
            let counts = (first && config.count_cap > 0).then(|| {
                let mut count = |mode| {
                    let ex = extract_plans(&mut graph, Some(Cursor::with_budget(mode, COUNT_BUDGET)), config.count_cap);
                    (ex.plans.len(), ex.terminal)
                };
                let (minimal, minimal_exact) = count(ExtractMode::MinimalLevel);
                let (to_level_off, to_level_off_exact) = count(ExtractMode::ThroughLevelOff);
                SolutionCounts {
                    minimal,
                    minimal_exact,
                    to_level_off,
                    to_level_off_exact,
                    cap: config.count_cap,
                }
            });
            Ok((
                elapsed,
                RequestResult {
                    adversarial: g.adversarial,
                    solutions: ex.plans.len(),
                    counts,
                    reachable,
                    time: Timing::default(),
                    graph: graph.stats(),
                },
            ))
        };
        let outcomes: Vec<Result<(Duration, RequestResult), BenchError>> = if config.parallel {
            std::thread::scope(|s| {
                let handles: Vec<_> = (0..domain.requests.len()).map(|i| s.spawn(move || run_one(i))).collect();
                handles.into_iter().map(|h| h.join().expect("request thread")).collect()
            })
        } else {
            (0..domain.requests.len()).map(run_one).collect()
        };
        for (i, o) in outcomes.into_iter().enumerate() {
            let (d, r) = o?;
            per_request[i].push(d);
            if results[i].is_none() {
                results[i] = Some(r);
            }
        }
    }
    let requests = results
        .into_iter()
        .zip(&per_request)
        .map(|(r, samples)| RequestResult {
            time: Timing::of(samples),
            ..r.expect("every request ran")
        })
        .collect();
    Ok(BenchReport {
        services: domain.services.len(),
        triples: sizes.0,
        classes: sizes.1,
        loading: Timing::of(&load),
        reasoning: Timing::of(&reason),
        requests,
        parallel: config.parallel,
        total_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
