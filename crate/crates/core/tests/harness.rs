use capbound::harness::frontier::{frontier_scenario, measure, to_csv, CSV_HEADER};
use capbound::harness::proof::replay;
use capbound::{
    check_bound, frontier_sweep, proof_replay, Latency, ProofReplaySpec, ScenarioConfig,
    StrategyParams, Tick, ViolationKind,
};

fn base() -> ScenarioConfig {
    ScenarioConfig::new(3, 1, StrategyParams::local_first(4))
}

#[test]
fn proof_spec_from_json() {
    let spec = ProofReplaySpec::from_json(
        r#"{"strategy":{"kind":"HybridDeadline","D":5},"tp":20,"t_start":10,"claimed_tc":5,"claimed_ta":5}"#,
    )
    .unwrap();
    let report = proof_replay(&spec).unwrap();
    assert_eq!(report.count(ViolationKind::Consistency), 1);
    assert_eq!(report.count(ViolationKind::Availability), 0);
}

#[test]
fn proof_rejects_claims_that_cover_the_partition() {
    let spec = ProofReplaySpec::new(StrategyParams::sync_all(2), 10, 6, 4);
    assert!(proof_replay(&spec).is_err());
    let spec = ProofReplaySpec::new(StrategyParams::sync_all(2), 10, 6, 3);
    assert!(proof_replay(&spec).is_ok());
}

#[test]
fn proof_isolates_n_a_from_everyone() {
    let mut spec = ProofReplaySpec::new(StrategyParams::local_first(2), 20, 3, 0);
    spec.nodes = 4;
    spec.n_a = capbound::NodeId(2);
    spec.n_b = capbound::NodeId(0);
    let outcome = replay(&spec).unwrap();
    assert_eq!(outcome.report.count(ViolationKind::Consistency), 1);
    let schedule = outcome.config.schedule().unwrap();
    assert_eq!(schedule.compute_tp(outcome.config.horizon), Tick(20));
}

#[test]
fn local_first_bound_at_fifteen() {
    let config =
        frontier_scenario(&base(), Tick(15), StrategyParams::local_first(4), Tick(0)).unwrap();
    let report = measure(&config).unwrap();
    assert_eq!(report.empirical_ta, Latency::Finite(Tick(0)));
    assert!((Tick(15)..=Tick(21)).contains(&report.empirical_tc_min));
    assert!(check_bound(&report, Tick(15), Tick(6)));
}

#[test]
fn sync_all_bound_at_fifteen() {
    let config =
        frontier_scenario(&base(), Tick(15), StrategyParams::sync_all(2), Tick(0)).unwrap();
    let report = measure(&config).unwrap();
    assert!(report.empirical_tc_min <= Tick(2));
    assert!(report.empirical_ta >= Latency::Finite(Tick(14)));
    assert!(check_bound(&report, Tick(15), Tick(2)));
}

#[test]
fn healthy_network_bound_is_trivial() {
    let config =
        frontier_scenario(&base(), Tick(0), StrategyParams::hybrid(3, 2), Tick(0)).unwrap();
    let report = measure(&config).unwrap();
    assert!(check_bound(&report, Tick(0), Tick(0)));
}

#[test]
fn frontier_rows_hold_the_lower_bound() {
    let deadlines: Vec<Tick> = [0, 2, 5, 10, 20].map(Tick).to_vec();
    let rows = frontier_sweep(Tick(20), &deadlines, &base()).unwrap();
    assert_eq!(rows.len(), deadlines.len() + 2);
    assert!(rows.iter().all(|r| r.bound_satisfied));
    let ta: Vec<_> = rows.iter().map(|r| r.empirical_ta).collect();
    assert!(
        ta.windows(2).all(|w| w[0] <= w[1]),
        "ta nondecreasing in D: {ta:?}"
    );
    assert_eq!(rows[0].empirical_ta, Latency::Finite(Tick(0)));
    assert!(rows.last().unwrap().empirical_tc_min <= Tick(2));
}

#[test]
fn frontier_csv_is_reproducible() {
    let deadlines = [Tick(1), Tick(4)];
    let a = to_csv(&frontier_sweep(Tick(10), &deadlines, &base()).unwrap());
    let b = to_csv(&frontier_sweep(Tick(10), &deadlines, &base()).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with(&format!("{CSV_HEADER}\n")));
    assert_eq!(a.lines().count(), 5);
}
