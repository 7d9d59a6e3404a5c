use semcompose::bench::{generate_domain, run_on, BenchConfig, OntologySource, RequestSpec, SyntheticOntology};

fn config(seed: u64) -> BenchConfig {
    BenchConfig {
        ontology: OntologySource::Synthetic(SyntheticOntology {
            classes: 80,
            max_depth: 5,
            branching: 4,
            extra_parent_rate: 0.1,
            target_triples: 2_000,
            seed,
        }),
        services: 150,
        service_seed: seed + 1,
        max_inputs: 5,
        max_outputs: 5,
        requests: RequestSpec {
            count: 4,
            seed: seed + 2,
            max_inputs: 4,
            max_goals: 2,
            unsatisfiable: 1,
        },
        plans_per_request: 3,
        repetitions: 3,
        parallel: false,
        count_cap: 50,
    }
}

#[test]
fn same_seed_same_solutions() {
    for seed in [1, 9, 40] {
        let c = config(seed);
        let d = generate_domain(&c).unwrap();
        let a = run_on(&c, &d).unwrap();
        let b = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
        let counts = |r: &semcompose::bench::BenchReport| -> Vec<(usize, bool)> {
            r.requests.iter().map(|q| (q.solutions, q.reachable)).collect()
        };
        assert_eq!(counts(&a), counts(&b));
        assert_eq!((a.triples, a.classes), (b.triples, b.classes));
        let graphs = |r: &semcompose::bench::BenchReport| -> Vec<_> { r.requests.iter().map(|q| q.graph.clone()).collect() };
        assert_eq!(graphs(&a), graphs(&b));
    }
}

#[test]
fn phases_fit_inside_the_total() {
    let c = config(3);
    let r = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
    let phases = c.repetitions as f64
        * (r.loading.min_ms + r.reasoning.min_ms + r.requests.iter().map(|q| q.time.min_ms).sum::<f64>());
    assert!(phases <= r.total_ms, "{phases} > {}", r.total_ms);
    for t in std::iter::once(&r.loading).chain([&r.reasoning]).chain(r.requests.iter().map(|q| &q.time)) {
        assert!(t.min_ms <= t.median_ms && t.median_ms <= t.max_ms);
    }
}

#[test]
fn unsatisfiable_requests_yield_nothing() {
    // A sparse catalog leaves classes out of reach.
    let c = BenchConfig {
        services: 30,
        max_inputs: 2,
        max_outputs: 2,
        ..config(5)
    };
    let r = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
    let adversarial: Vec<_> = r.requests.iter().filter(|q| q.adversarial).collect();
    assert_eq!(adversarial.len(), 1);
    assert!(adversarial.iter().all(|q| q.solutions == 0 && !q.reachable));
}

#[test]
fn parallel_runs_agree_with_sequential() {
    let c = config(7);
    let d = generate_domain(&c).unwrap();
    let seq = run_on(&c, &d).unwrap();
    let par = run_on(&BenchConfig { parallel: true, ..c }, &d).unwrap();
    assert!(par.parallel);
    let counts = |r: &semcompose::bench::BenchReport| -> Vec<usize> { r.requests.iter().map(|q| q.solutions).collect() };
    assert_eq!(counts(&seq), counts(&par));
}

#[test]
fn csv_has_one_row_per_request() {
    let c = config(2);
    let r = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
    let csv = r.csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("services,solutions,load_ms,reason_ms,request_ms"));
    assert_eq!(lines.count(), c.requests.count);
}

#[test]
fn config_round_trips_and_rejects_unknown_fields() {
    let c = BenchConfig::full_scale();
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(serde_json::from_str::<BenchConfig>(&text).unwrap(), c);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["bogus"] = 1.into();
    assert!(serde_json::from_value::<BenchConfig>(v).is_err());
    let zero = BenchConfig { services: 0, ..c };
    assert!(zero.validate().is_err());
}

#[test]
fn counts_bound_the_timed_solutions() {
    for seed in [4, 11] {
        let c = config(seed);
        let r = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
        for q in &r.requests {
            let counts = q.counts.expect("counts requested");
            assert!(counts.minimal <= c.count_cap && counts.to_level_off <= c.count_cap);
            if counts.to_level_off_exact {
                assert!(counts.minimal_exact);
                assert!(counts.minimal <= counts.to_level_off);
            }
            if counts.minimal_exact {
                assert_eq!(q.solutions, counts.minimal.min(c.plans_per_request));
            } else {
                assert!(q.solutions >= counts.minimal.min(c.plans_per_request));
            }
        }
    }
    let c = BenchConfig { count_cap: 0, ..config(4) };
    let r = run_on(&c, &generate_domain(&c).unwrap()).unwrap();
    assert!(r.requests.iter().all(|q| q.counts.is_none()));
}
