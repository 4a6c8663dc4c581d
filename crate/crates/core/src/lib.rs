//! Deterministic simulation of a replicated register service under network
//! partitions, and a checker that measures how stale its reads were (`tc`)
//! and how long its responses took (`ta`) against the longest partition
//! (`tp`) it had to live through.
//!
//! The pieces, bottom up:
//!
//! * [`partition`]: link outage schedules, reachability and `tp`.
//! * [`sim`]: the virtual-time event loop and its JSON-lines trace.
//! * [`strategy`]: `LocalFirst`, `SyncAll` and `HybridDeadline` replicas.
//! * [`checker`]: history extraction, valid read sets, `min_tc`, bound checks.
//! * [`harness`]: proof replay and deadline frontier sweeps.

pub mod checker;
pub mod harness;
pub mod partition;
pub mod register;
pub mod scenario;
pub mod sim;
pub mod strategy;
pub mod time;

pub use checker::{
    check, check_bound, extract_history, min_tc, valid_read_values, CheckReport, History, Latency,
    OperationRecord, ReadReference, Violation, ViolationKind,
};
pub use harness::{frontier_sweep, proof_replay, FrontierRow, ProofReplaySpec};
pub use partition::{LinkOutage, PartitionSchedule, Reachability};
pub use register::{Entry, RegisterState, Version};
pub use scenario::{run, ConfigError, RunError, ScenarioConfig, WorkloadOp};
pub use sim::{ClientOp, OpKind, SimError, Trace, TraceEvent, TraceRecord};
pub use strategy::{Replica, StrategyParams};
pub use time::{NodeId, OpId, Tick};
