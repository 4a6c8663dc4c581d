//! Executable replay of the impossibility argument.
//!
//! Inside a partition that separates `n_a` from `n_b` for `tp` ticks, a
//! write lands at `n_a` at tick `t` and a read of the same key lands at
//! `n_b` at `t + claimed_tc`. If the read answers within `claimed_ta` it
//! answers before any message can cross the cut, so it cannot reflect the
//! write, which the staleness bound requires. Either way the claimed
//! `(tc, ta)` pair is violated whenever `claimed_tc + claimed_ta < tp`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{check, extract_history, CheckReport, History, HistoryError};
use crate::partition::PartitionSchedule;
use crate::scenario::{run, ConfigError, RunError, ScenarioConfig, WorkloadOp};
use crate::sim::Trace;
use crate::strategy::StrategyParams;
use crate::time::{NodeId, Tick};

pub const PROOF_KEY: &str = "A";

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("invalid proof spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("cannot parse proof spec: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<ConfigError> for ProofError {
    fn from(e: ConfigError) -> Self {
        ProofError::Run(RunError::Config(e))
    }
}

fn default_nodes() -> usize {
    2
}

fn default_a() -> NodeId {
    NodeId(0)
}

fn default_b() -> NodeId {
    NodeId(1)
}

fn default_latency() -> Tick {
    Tick(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProofReplaySpec {
    pub strategy: StrategyParams,
    pub tp: Tick,
    pub t_start: Tick,
    pub claimed_tc: Tick,
    pub claimed_ta: Tick,
    #[serde(default = "default_a")]
    pub n_a: NodeId,
    #[serde(default = "default_b")]
    pub n_b: NodeId,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_latency")]
    pub latency: Tick,
}

/// Everything a replay produced, for inspection beyond the report.
#[derive(Debug, Clone)]
pub struct ProofOutcome {
    pub config: ScenarioConfig,
    pub trace: Trace,
    pub history: History,
    pub report: CheckReport,
}

impl ProofReplaySpec {
    pub fn new(strategy: StrategyParams, tp: u64, claimed_tc: u64, claimed_ta: u64) -> Self {
        ProofReplaySpec {
            strategy,
            tp: Tick(tp),
            t_start: Tick(10),
            claimed_tc: Tick(claimed_tc),
            claimed_ta: Tick(claimed_ta),
            n_a: NodeId(0),
            n_b: NodeId(1),
            nodes: 2,
            latency: Tick(1),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ProofError> {
        let spec: ProofReplaySpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ProofError> {
        if self.claimed_tc + self.claimed_ta >= self.tp {
            return Err(ProofError::Invalid(format!(
                "claimed tc {} + ta {} must be below tp {}",
                self.claimed_tc, self.claimed_ta, self.tp
            )));
        }
        if self.nodes < 2 {
            return Err(ProofError::Invalid("needs at least two nodes".into()));
        }
        if self.n_a == self.n_b {
            return Err(ProofError::Invalid("n_a and n_b must differ".into()));
        }
        for n in [self.n_a, self.n_b] {
            if n.index() >= self.nodes {
                return Err(ProofError::Invalid(format!(
                    "{n} out of range for {} nodes",
                    self.nodes
                )));
            }
        }
        self.strategy.validate().map_err(ProofError::Invalid)
    }

    /// Tick at which the write lands. The partition interval is half-open,
    /// so `t_start` itself is already cut and the whole window
    /// `[t, t + tc + ta]` sits inside `[t_start, t_start + tp)`.
    pub fn write_tick(&self) -> Tick {
        self.t_start
    }

    pub fn read_tick(&self) -> Tick {
        self.write_tick() + self.claimed_tc
    }

    /// The scenario that realizes this spec.
    pub fn scenario(&self) -> Result<ScenarioConfig, ProofError> {
        self.validate()?;
        let heal = self.t_start + self.tp;
        let period = match self.strategy {
            StrategyParams::LocalFirst {
                anti_entropy_period,
            } => anti_entropy_period,
            StrategyParams::SyncAll { retransmit_period } => retransmit_period,
            StrategyParams::HybridDeadline {
                deadline,
                retransmit_period,
            } => deadline + retransmit_period,
        };
        let tail = Tick(4 * period.get() + 4 * self.latency.get() + 10);
        let schedule = PartitionSchedule::bipartition(self.nodes, &[self.n_a], self.t_start, heal)
            .map_err(ConfigError::from)?;
        let mut config = ScenarioConfig::new(self.nodes, 0, self.strategy);
        config.latency = self.latency;
        config.horizon = heal + tail;
        config.partitions = schedule.outages().to_vec();
        config.workload = vec![
            WorkloadOp::write(self.write_tick().get(), self.n_a.0, PROOF_KEY, 1),
            WorkloadOp::read(self.read_tick().get(), self.n_b.0, PROOF_KEY),
        ];
        Ok(config)
    }
}

pub fn replay(spec: &ProofReplaySpec) -> Result<ProofOutcome, ProofError> {
    let config = spec.scenario()?;
    let trace = run(&config)?;
    let history = extract_history(&trace)?;
    let report = check(&history, spec.claimed_tc, spec.claimed_ta);
    Ok(ProofOutcome {
        config,
        trace,
        history,
        report,
    })
}

/// Runs the replay and returns the report against the claimed bounds.
pub fn proof_replay(spec: &ProofReplaySpec) -> Result<CheckReport, ProofError> {
    replay(spec).map(|o| o.report)
}
