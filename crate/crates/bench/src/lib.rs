//! Fixtures shared by the benchmarks.

use capbound::{
    LinkOutage, NodeId, OperationRecord, PartitionSchedule, ScenarioConfig, StrategyParams, Tick,
    WorkloadOp,
};

/// A `nodes`-node scenario with one write and one read per tick for `ticks`
/// ticks and a partition isolating node 0 for the middle third.
pub fn busy_scenario(nodes: usize, ticks: u64, strategy: StrategyParams) -> ScenarioConfig {
    let mut config = ScenarioConfig::new(nodes, ticks * 2 + 50, strategy);
    let cut =
        PartitionSchedule::bipartition(nodes, &[NodeId(0)], Tick(ticks / 3), Tick(2 * ticks / 3))
            .expect("valid bipartition");
    config.partitions = cut.outages().to_vec();
    let last = (nodes - 1) as u32;
    for t in 0..ticks {
        config.workload.push(WorkloadOp::write(t, 0, "A", t as i64));
        config.workload.push(WorkloadOp::read(t, last, "A"));
    }
    config
}

/// Outages on a ring of `nodes` nodes, each link down for a staggered window.
pub fn ring_schedule(nodes: usize, horizon: u64) -> PartitionSchedule {
    let mut schedule = PartitionSchedule::healthy(nodes);
    for i in 0..nodes {
        let j = (i + 1) % nodes;
        let start = (i as u64 * 37) % horizon;
        schedule
            .add(LinkOutage::new(
                NodeId(i as u32),
                NodeId(j as u32),
                Tick(start),
                Tick((start + horizon / 4).min(horizon)),
            ))
            .expect("valid outage");
    }
    schedule
}

/// A single-key history with a write every tick and a read lagging by `lag`.
pub fn lagging_history(ops: u64, lag: u64) -> Vec<OperationRecord> {
    let mut records = Vec::new();
    for t in 0..ops {
        records.push(OperationRecord::write(2 * t, 0, "A", t as i64, t, t));
        let seen = t.saturating_sub(lag) as i64;
        records.push(OperationRecord::read(2 * t + 1, 1, "A", Some(seen), t, t));
    }
    records
}
