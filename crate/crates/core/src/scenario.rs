//! Scenario files and the top-level `run`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::HistoryError;
use crate::partition::{LinkOutage, PartitionError, PartitionSchedule, Reachability};
use crate::sim::{ClientOp, OpKind, SimError, SimOutcome, SimSettings, Simulation, Trace};
use crate::strategy::{Replica, StrategyParams};
use crate::time::{NodeId, OpId, Tick};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("cannot parse scenario: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// One scripted client request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadOp {
    pub t: Tick,
    pub node: NodeId,
    pub kind: OpKind,
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val: Option<i64>,
}

impl WorkloadOp {
    pub fn write(t: u64, node: u32, key: &str, val: i64) -> Self {
        WorkloadOp {
            t: Tick(t),
            node: NodeId(node),
            kind: OpKind::Write,
            key: key.to_owned(),
            val: Some(val),
        }
    }

    pub fn read(t: u64, node: u32, key: &str) -> Self {
        WorkloadOp {
            t: Tick(t),
            node: NodeId(node),
            kind: OpKind::Read,
            key: key.to_owned(),
            val: None,
        }
    }
}

/// Seeded random operations appended after the scripted workload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub ops: usize,
    #[serde(default = "default_noise_keys")]
    pub keys: Vec<String>,
}

fn default_noise_keys() -> Vec<String> {
    vec!["A".to_owned()]
}

fn default_latency() -> Tick {
    Tick(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub nodes: usize,
    #[serde(default = "default_latency")]
    pub latency: Tick,
    pub horizon: Tick,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub partitions: Vec<LinkOutage>,
    pub strategy: StrategyParams,
    #[serde(default)]
    pub workload: Vec<WorkloadOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseParams>,
    #[serde(default, skip_serializing_if = "is_path")]
    pub reachability: Reachability,
}

fn is_path(r: &Reachability) -> bool {
    *r == Reachability::Path
}

impl ScenarioConfig {
    pub fn new(nodes: usize, horizon: u64, strategy: StrategyParams) -> Self {
        ScenarioConfig {
            nodes,
            latency: Tick(1),
            horizon: Tick(horizon),
            seed: 0,
            partitions: Vec::new(),
            strategy,
            workload: Vec::new(),
            noise: None,
            reachability: Reachability::Path,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn schedule(&self) -> Result<PartitionSchedule, ConfigError> {
        Ok(PartitionSchedule::new(self.nodes, self.partitions.clone())?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nodes == 0 {
            return Err(ConfigError::Invalid("scenario has zero nodes".into()));
        }
        if self.latency == Tick::ZERO {
            return Err(ConfigError::Invalid("latency must be at least 1".into()));
        }
        self.strategy.validate().map_err(ConfigError::Invalid)?;
        self.schedule()?;
        for (idx, op) in self.workload.iter().enumerate() {
            if op.node.index() >= self.nodes {
                return Err(ConfigError::Invalid(format!(
                    "workload[{idx}] addresses {} in a {}-node scenario",
                    op.node, self.nodes
                )));
            }
            if op.t >= self.horizon {
                return Err(ConfigError::Invalid(format!(
                    "workload[{idx}] at tick {} is not before horizon {}",
                    op.t, self.horizon
                )));
            }
            match (op.kind, op.val) {
                (OpKind::Write, None) => {
                    return Err(ConfigError::Invalid(format!(
                        "workload[{idx}] is a write without a value"
                    )))
                }
                (OpKind::Read, Some(_)) => {
                    return Err(ConfigError::Invalid(format!(
                        "workload[{idx}] is a read with a value"
                    )))
                }
                _ => {}
            }
        }
        if let Some(noise) = &self.noise {
            if noise.ops > 0 && noise.keys.is_empty() {
                return Err(ConfigError::Invalid("noise needs at least one key".into()));
            }
        }
        Ok(())
    }

    /// Scripted workload followed by any seeded noise; op ids are positions
    /// in this list.
    pub fn operations(&self) -> Vec<(Tick, ClientOp)> {
        let mut ops: Vec<WorkloadOp> = self.workload.clone();
        if let Some(noise) = &self.noise {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for _ in 0..noise.ops {
                let t = Tick(rng.gen_range(0..self.horizon.get().max(1)));
                let node = NodeId(rng.gen_range(0..self.nodes as u32));
                let key = noise.keys[rng.gen_range(0..noise.keys.len())].clone();
                ops.push(if rng.gen_bool(0.5) {
                    WorkloadOp {
                        t,
                        node,
                        kind: OpKind::Write,
                        key,
                        val: Some(rng.gen_range(0..1000)),
                    }
                } else {
                    WorkloadOp {
                        t,
                        node,
                        kind: OpKind::Read,
                        key,
                        val: None,
                    }
                });
            }
        }
        ops.into_iter()
            .enumerate()
            .map(|(idx, w)| {
                (
                    w.t,
                    ClientOp {
                        id: OpId(idx as u64),
                        node: w.node,
                        kind: w.kind,
                        key: w.key,
                        val: w.val,
                    },
                )
            })
            .collect()
    }
}

/// Runs a scenario and keeps the final replica states.
pub fn run_outcome(config: &ScenarioConfig) -> Result<SimOutcome<Replica>, RunError> {
    config.validate()?;
    let settings = SimSettings {
        latency: config.latency,
        horizon: config.horizon,
        schedule: config.schedule()?,
        reachability: config.reachability,
    };
    let nodes = (0..config.nodes)
        .map(|_| Replica::new(config.strategy))
        .collect();
    let mut sim = Simulation::new(settings, nodes)?;
    for (at, op) in config.operations() {
        sim.submit(at, op)?;
    }
    Ok(sim.finish()?)
}

pub fn run(config: &ScenarioConfig) -> Result<Trace, RunError> {
    run_outcome(config).map(|o| o.trace)
}
