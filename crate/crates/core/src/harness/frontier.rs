//! Sweeps over response deadlines under a single partition of length `tp`.
//!
//! Node 0 is cut off from every other node for `tp` ticks. It takes a write
//! every other tick for the whole run while the last node reads every tick,
//! and node 0 reads its own key every third tick, so data has to cross the
//! cut for reads to be fresh.

use std::fmt;

use rayon::prelude::*;

use crate::checker::{check, check_bound, extract_history, CheckReport, Latency};
use crate::partition::PartitionSchedule;
use crate::scenario::{run, ConfigError, RunError, ScenarioConfig, WorkloadOp};
use crate::strategy::{StrategyParams, DEFAULT_ANTI_ENTROPY_PERIOD, DEFAULT_RETRANSMIT_PERIOD};
use crate::time::{NodeId, Tick};

pub const FRONTIER_KEY: &str = "A";
pub const CSV_HEADER: &str = "D,tc,ta,tp,bound_ok";

const WRITE_PERIOD: u64 = 2;
const OWN_READ_PERIOD: u64 = 3;

/// Which strategy a row measured. Deadline-free strategies sit at the ends
/// of the deadline axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    LocalFirst,
    Deadline(Tick),
    SyncAll,
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowLabel::LocalFirst => f.write_str("local"),
            RowLabel::Deadline(d) => d.fmt(f),
            RowLabel::SyncAll => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierRow {
    pub label: RowLabel,
    pub strategy: StrategyParams,
    pub empirical_tc_min: Tick,
    pub empirical_ta: Latency,
    pub tp: Tick,
    pub slack: Tick,
    pub bound_satisfied: bool,
}

impl FrontierRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.label, self.empirical_tc_min, self.empirical_ta, self.tp, self.bound_satisfied
        )
    }
}

/// Header plus one line per row, `\n`-terminated.
pub fn to_csv(rows: &[FrontierRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Gossip and retransmit periods taken from the base config's strategy.
fn periods(base: &ScenarioConfig) -> (Tick, Tick) {
    match base.strategy {
        StrategyParams::LocalFirst {
            anti_entropy_period,
        } => (anti_entropy_period, DEFAULT_RETRANSMIT_PERIOD),
        StrategyParams::SyncAll { retransmit_period }
        | StrategyParams::HybridDeadline {
            retransmit_period, ..
        } => (DEFAULT_ANTI_ENTROPY_PERIOD, retransmit_period),
    }
}

/// The strategies a sweep runs, in output order.
pub fn sweep_strategies(
    base: &ScenarioConfig,
    deadlines: &[Tick],
) -> Vec<(RowLabel, StrategyParams)> {
    let (gossip, retransmit) = periods(base);
    let mut out = vec![(
        RowLabel::LocalFirst,
        StrategyParams::LocalFirst {
            anti_entropy_period: gossip,
        },
    )];
    out.extend(deadlines.iter().map(|&d| {
        (
            RowLabel::Deadline(d),
            StrategyParams::HybridDeadline {
                deadline: d,
                retransmit_period: retransmit,
            },
        )
    }));
    out.push((
        RowLabel::SyncAll,
        StrategyParams::SyncAll {
            retransmit_period: retransmit,
        },
    ));
    out
}

/// The partition-crossing scenario for one strategy. `max_deadline` sizes the
/// tail so deadline responses land before the horizon.
pub fn frontier_scenario(
    base: &ScenarioConfig,
    tp: Tick,
    strategy: StrategyParams,
    max_deadline: Tick,
) -> Result<ScenarioConfig, ConfigError> {
    if base.nodes < 2 {
        return Err(ConfigError::Invalid(
            "frontier needs at least two nodes".into(),
        ));
    }
    let (gossip, retransmit) = periods(base);
    let lat = base.latency.get();
    let periods_sum = gossip.get() + retransmit.get();
    let t_start = Tick(2 * gossip.get().max(retransmit.get()) + 10);
    let heal = t_start + tp;
    let ops_end = heal + Tick(2 * periods_sum + 4 * lat + 10);
    let horizon = ops_end + tp.max(max_deadline) + Tick(4 * periods_sum + 8 * lat + 10);

    let mut config = base.clone();
    config.strategy = strategy;
    config.horizon = horizon;
    config.partitions = if tp == Tick::ZERO {
        Vec::new()
    } else {
        PartitionSchedule::bipartition(base.nodes, &[NodeId(0)], t_start, heal)?
            .outages()
            .to_vec()
    };
    let reader = (base.nodes - 1) as u32;
    let mut workload = Vec::new();
    let mut value = 0;
    for t in 0..ops_end.get() {
        if t % WRITE_PERIOD == 0 {
            value += 1;
            workload.push(WorkloadOp::write(t, 0, FRONTIER_KEY, value));
        }
        workload.push(WorkloadOp::read(t, reader, FRONTIER_KEY));
        if t % OWN_READ_PERIOD == 1 {
            workload.push(WorkloadOp::read(t, 0, FRONTIER_KEY));
        }
    }
    config.workload = workload;
    config.validate()?;
    Ok(config)
}

/// Runs a scenario and reports its empirical bounds (declared bounds are
/// left unbounded, so only integrity problems show up as violations).
pub fn measure(config: &ScenarioConfig) -> Result<CheckReport, RunError> {
    let trace = run(config)?;
    let history = extract_history(&trace)?;
    Ok(check(&history, Tick::MAX, Tick::MAX))
}

/// One row per strategy: LocalFirst, HybridDeadline for each deadline in
/// order, then SyncAll. Scenarios run in parallel; rows keep input order.
pub fn frontier_sweep(
    tp: Tick,
    deadlines: &[Tick],
    base: &ScenarioConfig,
) -> Result<Vec<FrontierRow>, RunError> {
    let max_deadline = deadlines.iter().copied().max().unwrap_or(Tick::ZERO);
    let plan = sweep_strategies(base, deadlines);
    plan.into_par_iter()
        .map(|(label, strategy)| {
            let config = frontier_scenario(base, tp, strategy, max_deadline)?;
            let report = measure(&config)?;
            let slack = strategy.slack(config.latency);
            Ok(FrontierRow {
                label,
                strategy,
                empirical_tc_min: report.empirical_tc_min,
                empirical_ta: report.empirical_ta,
                tp,
                slack,
                bound_satisfied: check_bound(&report, tp, slack),
            })
        })
        .collect()
}
