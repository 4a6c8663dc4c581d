//! Brute-force oracles and random inputs shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use capbound::{
    History, LinkOutage, NodeId, OpKind, OperationRecord, PartitionSchedule, Reachability,
    ScenarioConfig, StrategyParams, Tick, WorkloadOp,
};
use rand::Rng;

/// Link state straight from the outage list.
pub fn oracle_link_up(outages: &[LinkOutage], t: u64, a: u32, b: u32) -> bool {
    !outages.iter().any(|o| {
        let same = (o.a.0 == a && o.b.0 == b) || (o.a.0 == b && o.b.0 == a);
        same && o.start.0 <= t && t < o.end.0
    })
}

pub fn oracle_connected(nodes: usize, outages: &[LinkOutage], t: u64, a: u32, b: u32) -> bool {
    let mut seen = vec![false; nodes];
    let mut queue = VecDeque::from([a]);
    seen[a as usize] = true;
    while let Some(x) = queue.pop_front() {
        if x == b {
            return true;
        }
        for y in 0..nodes as u32 {
            if !seen[y as usize] && y != x && oracle_link_up(outages, t, x, y) {
                seen[y as usize] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Longest run of ticks in `[0, horizon)` during which some pair is cut.
pub fn oracle_tp(nodes: usize, outages: &[LinkOutage], horizon: u64, mode: Reachability) -> u64 {
    let mut best = 0;
    for a in 0..nodes as u32 {
        for b in a + 1..nodes as u32 {
            let mut run = 0;
            for t in 0..horizon {
                let ok = match mode {
                    Reachability::Path => oracle_connected(nodes, outages, t, a, b),
                    Reachability::Direct => oracle_link_up(outages, t, a, b),
                };
                run = if ok { 0 } else { run + 1 };
                best = best.max(run);
            }
        }
    }
    best
}

pub fn random_outages(rng: &mut impl Rng, nodes: usize, horizon: u64) -> Vec<LinkOutage> {
    let count = rng.gen_range(0..=6);
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0..nodes as u32);
            let mut b = rng.gen_range(0..nodes as u32 - 1);
            if b >= a {
                b += 1;
            }
            let start = rng.gen_range(0..horizon);
            let len = rng.gen_range(1..=horizon / 2 + 1);
            LinkOutage::new(NodeId(a), NodeId(b), Tick(start), Tick(start + len))
        })
        .collect()
}

pub fn random_schedule(rng: &mut impl Rng) -> (usize, Vec<LinkOutage>, u64) {
    let nodes = rng.gen_range(2..=4);
    let horizon = rng.gen_range(1..=200);
    let mut outages = random_outages(rng, nodes, horizon);
    if rng.gen_bool(0.3) {
        let node = rng.gen_range(0..nodes as u32);
        let start = rng.gen_range(0..horizon);
        let end = start + rng.gen_range(1..=40);
        for peer in (0..nodes as u32).filter(|&p| p != node) {
            outages.push(LinkOutage::new(
                NodeId(node),
                NodeId(peer),
                Tick(start),
                Tick(end),
            ));
        }
    }
    (nodes, outages, horizon)
}

pub fn schedule_of(nodes: usize, outages: &[LinkOutage]) -> PartitionSchedule {
    PartitionSchedule::new(nodes, outages.to_vec()).expect("valid schedule")
}

/// Writes to `key` in the checker's total order.
fn ordered_writes<'a>(history: &'a History, key: &str) -> Vec<&'a OperationRecord> {
    let mut writes: Vec<_> = history
        .ops()
        .iter()
        .filter(|r| r.kind == OpKind::Write && r.key == key)
        .collect();
    writes.sort_by_key(|w| (w.invoke, w.node, w.op));
    writes
}

/// Baseline plus optional window, built directly from the definition.
pub fn oracle_valid_set(history: &History, key: &str, t: u64, tc: u64) -> BTreeSet<Option<i64>> {
    let writes = ordered_writes(history, key);
    let mut out = BTreeSet::new();
    let baseline = writes.iter().rfind(|w| tc <= t && w.invoke.0 <= t - tc);
    out.insert(baseline.and_then(|w| w.value));
    for w in &writes {
        let after_boundary = tc > t || w.invoke.0 > t - tc;
        if after_boundary && w.invoke.0 <= t {
            out.insert(w.value);
        }
    }
    out
}

/// Least `tc` in `0..=limit` admitting every read, by linear scan.
pub fn scan_min_tc(history: &History, limit: u64) -> Option<u64> {
    (0..=limit).find(|&tc| {
        history.ops().iter().all(|r| {
            r.kind != OpKind::Read
                || r.response
                    .is_none_or(|t| oracle_valid_set(history, &r.key, t.0, tc).contains(&r.value))
        })
    })
}

/// Small integrity-clean history: reads only return values some write
/// invoked at or before the read's response produced.
pub fn random_history(rng: &mut impl Rng) -> History {
    let nodes = rng.gen_range(1..=3u32);
    let horizon = rng.gen_range(1..=100u64);
    let len = rng.gen_range(1..=30u64);
    let keys = ["A", "B"];
    let mut ops = Vec::new();
    for op in 0..len {
        let key = keys[rng.gen_range(0..keys.len())];
        let node = rng.gen_range(0..nodes);
        let invoke = rng.gen_range(0..horizon);
        let response = (invoke + rng.gen_range(0..=10)).min(horizon);
        if rng.gen_bool(0.5) {
            let value = rng.gen_range(0..6);
            ops.push(OperationRecord::write(
                op, node, key, value, invoke, response,
            ));
        } else {
            ops.push(OperationRecord::read(op, node, key, None, invoke, response));
        }
    }
    let snapshot = ops.clone();
    for rec in ops.iter_mut().filter(|r| r.kind == OpKind::Read) {
        let response = rec.response.expect("generated answered");
        let choices: Vec<_> = snapshot
            .iter()
            .filter(|w| w.kind == OpKind::Write && w.key == rec.key && w.invoke <= response)
            .map(|w| w.value)
            .collect();
        if !choices.is_empty() && rng.gen_bool(0.85) {
            rec.value = choices[rng.gen_range(0..choices.len())];
        }
    }
    History::from_records(ops).expect("generated history is well formed")
}

pub fn all_strategies() -> Vec<StrategyParams> {
    vec![
        StrategyParams::local_first(2),
        StrategyParams::local_first(4),
        StrategyParams::sync_all(2),
        StrategyParams::hybrid(0, 2),
        StrategyParams::hybrid(4, 2),
        StrategyParams::hybrid(8, 2),
        StrategyParams::hybrid(12, 2),
    ]
}

/// Random scenario with scripted ops on two keys and random outages.
pub fn random_scenario(rng: &mut impl Rng, strategy: StrategyParams) -> ScenarioConfig {
    let nodes = rng.gen_range(1..=4);
    let horizon = rng.gen_range(10..=80);
    let mut config = ScenarioConfig::new(nodes, horizon, strategy);
    config.latency = Tick(rng.gen_range(1..=3));
    config.seed = rng.gen();
    if nodes > 1 {
        config.partitions = random_outages(rng, nodes, horizon);
    }
    let mut value = 0;
    for _ in 0..rng.gen_range(0..=25) {
        let t = rng.gen_range(0..horizon);
        let node = rng.gen_range(0..nodes as u32);
        let key = if rng.gen_bool(0.5) { "A" } else { "B" };
        if rng.gen_bool(0.5) {
            value += 1;
            config.workload.push(WorkloadOp::write(t, node, key, value));
        } else {
            config.workload.push(WorkloadOp::read(t, node, key));
        }
    }
    config
}
