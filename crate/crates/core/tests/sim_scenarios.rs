use teamalloc::nodes::Variant;
use teamalloc::par::Execution;
use teamalloc::plan::{Group, Job, JobPlan, PlanAction, PlanNode, WorkerKind, WorkerSpec};
use teamalloc::reference::{simulated_job, SIMULATED_ALLOCATION};
use teamalloc::sim::{generate_plan, run_benchmark, run_sim, BenchmarkSpec, Policy, SimConfig, Topology, TraceOutcome};

fn sim(variant: Variant) -> SimConfig {
    let mut config = SimConfig::default();
    config.run.variant = variant;
    config
}

#[test]
fn collab_mt_uses_the_published_pairs() {
    let outcome = run_sim(simulated_job(), &sim(Variant::CollabMt)).unwrap();
    assert!(outcome.succeeded());
    assert_eq!(outcome.trace.candidate_for("a4"), Some("w1+w2"));
    assert_eq!(outcome.trace.candidate_for("a13"), Some("w2+w3"));
}

#[test]
fn simulated_job_schedules_stay_consistent() {
    let job = Job::new(simulated_job(), 2).unwrap();
    for variant in Variant::ALL {
        let outcome = run_sim(simulated_job(), &sim(variant)).unwrap();
        assert!(outcome.succeeded(), "{variant:?}");
        assert_eq!(outcome.trace.completed().count(), 13);
        assert!(outcome.trace.overlaps().is_empty());
        assert!(outcome.trace.precedence_violations(&job).is_empty());
        assert!(outcome.trace.duration_mismatches(&job).is_empty());
    }
}

#[test]
fn coop_st_matches_every_published_worker() {
    let outcome = run_sim(simulated_job(), &sim(Variant::CoopSt)).unwrap();
    for (j, row) in SIMULATED_ALLOCATION.iter().enumerate() {
        let id = format!("a{}", j + 1);
        assert_eq!(outcome.trace.candidate_for(&id), Some(row[2]), "{id}");
    }
}

#[test]
fn coop_st_runs_batches_after_everyone_is_free() {
    let outcome = run_sim(simulated_job(), &sim(Variant::CoopSt)).unwrap();
    let starts = |id: &str| outcome.trace.completed().find(|e| e.action == id).unwrap().start;
    let first_batch_end = ["a1", "a5", "a7"]
        .iter()
        .map(|id| outcome.trace.completed().find(|e| &e.action == id).unwrap().end)
        .fold(0.0, f64::max);
    assert!(starts("a2") >= first_batch_end);
}

fn single(cost: f64) -> JobPlan {
    JobPlan {
        name: "one".into(),
        workers: vec![WorkerSpec {
            id: "r".into(),
            kind: WorkerKind::Robot,
            position: None,
        }],
        actions: vec![PlanAction::new("a", &[("r", cost)])],
        structure: PlanNode::action("a"),
    }
}

#[test]
fn one_action_one_worker() {
    let outcome = run_sim(single(12.5), &SimConfig::default()).unwrap();
    let entries: Vec<_> = outcome.trace.entries.iter().collect();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].end - entries[0].start, 12.5);
    // One tick to register and one to allocate.
    assert!((outcome.makespan - 12.51).abs() < 1e-9);
}

#[test]
fn rejections_appear_in_the_trace() {
    let mut config = SimConfig::default();
    config.policies.insert("w1".into(), Policy::reject_once(&["a1"]));
    let outcome = run_sim(simulated_job(), &config).unwrap();
    assert!(outcome.succeeded());
    let rejected: Vec<_> = outcome
        .trace
        .entries
        .iter()
        .filter(|e| e.outcome == TraceOutcome::Rejected)
        .map(|e| (e.candidate.as_str(), e.action.as_str()))
        .collect();
    assert_eq!(rejected, [("w1", "a1")]);
    assert_eq!(outcome.trace.rejections.len(), 1);
    assert_eq!(outcome.trace.rejections[0].worker, "w1");
}

#[test]
fn trace_exports() {
    let outcome = run_sim(single(3.0), &SimConfig::default()).unwrap();
    assert_eq!(outcome.trace.to_csv(), "r,a,0.010,3.010,completed\n");
    let gantt = outcome.trace.gantt_table();
    assert_eq!(gantt, "worker,candidate,action,start,duration,outcome\nr,r,a,0.010,3.000,completed\n");
}

#[test]
fn allocation_fault_ends_with_partial_trace() {
    // Two human-only actions in parallel with two workers: the exact-count
    // constraint cannot be met.
    let plan = JobPlan {
        name: "stuck".into(),
        workers: vec![
            WorkerSpec { id: "h".into(), kind: WorkerKind::Human, position: None },
            WorkerSpec { id: "r".into(), kind: WorkerKind::Robot, position: None },
        ],
        actions: vec![
            PlanAction::new("a", &[("h", 2.0), ("r", 9.0)]),
            PlanAction::new("b", &[("h", 2.0)]),
            PlanAction::new("c", &[("h", 2.0)]),
        ],
        structure: PlanNode::seq(vec![
            PlanNode::action("a"),
            PlanNode::par(vec![PlanNode::action("b"), PlanNode::action("c")]),
        ]),
    };
    let outcome = run_sim(plan, &SimConfig::default()).unwrap();
    assert!(!outcome.succeeded());
    assert!(outcome.error.unwrap().contains("infeasible"));
    assert_eq!(outcome.trace.candidate_for("a"), Some("h"));
    assert_eq!(outcome.trace.completed().count(), 1);
}

#[test]
fn generated_plans() {
    let series = generate_plan(Topology::Series, 3, 2, 1);
    assert_eq!(series.structure, PlanNode::seq(vec![PlanNode::action("a1"), PlanNode::action("a2"), PlanNode::action("a3")]));
    let parallel = generate_plan(Topology::Parallel, 101, 2, 1);
    let PlanNode::Group(Group::Parallel(children)) = &parallel.structure else {
        panic!("expected one parallel group");
    };
    assert_eq!(children.len(), 101);
    assert!(children.iter().all(|c| matches!(c, PlanNode::Action(_))));
    assert_eq!(generate_plan(Topology::Series, 5, 4, 9), generate_plan(Topology::Series, 5, 4, 9));
    assert_ne!(generate_plan(Topology::Series, 5, 4, 9), generate_plan(Topology::Series, 5, 4, 10));
}

#[test]
fn benchmark_reports_candidate_growth() {
    let spec = BenchmarkSpec {
        topology: Topology::Series,
        actions: vec![12],
        agents: vec![3, 5, 10, 20],
        variant: Variant::CollabMt,
        repetitions: 1,
        seed: 0,
    };
    let rows = run_benchmark(&spec, Execution::Parallel).unwrap();
    let candidates: Vec<usize> = rows.iter().map(|r| r.candidates).collect();
    assert_eq!(candidates, [6, 15, 55, 210]);
    assert!(rows.iter().all(|r| r.solves > 0 && r.mean_s > 0.0));
}

#[test]
fn benchmark_sanity_floor() {
    let spec = BenchmarkSpec {
        topology: Topology::Series,
        actions: vec![1],
        agents: vec![1],
        variant: Variant::CoopMt,
        repetitions: 3,
        seed: 0,
    };
    let rows = run_benchmark(&spec, Execution::Sequential).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].mean_s < 0.1);
    assert!(rows[0].min_s <= rows[0].mean_s && rows[0].mean_s <= rows[0].max_s);
}

#[test]
fn benchmark_spec_is_validated() {
    let spec = BenchmarkSpec {
        topology: Topology::Series,
        actions: vec![0],
        agents: vec![1],
        variant: Variant::CollabMt,
        repetitions: 1,
        seed: 0,
    };
    assert!(run_benchmark(&spec, Execution::Sequential).is_err());
}
