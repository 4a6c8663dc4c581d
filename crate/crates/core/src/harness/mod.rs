//! Experiments built on the simulator and checker.

pub mod frontier;
pub mod proof;

pub use frontier::{frontier_scenario, frontier_sweep, measure, to_csv, FrontierRow, RowLabel};
pub use proof::{proof_replay, replay, ProofError, ProofOutcome, ProofReplaySpec};
