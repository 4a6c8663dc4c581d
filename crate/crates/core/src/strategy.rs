//! Replication strategies for the keyed register service.
//!
//! * `LocalFirst` answers every request from local state, pushes writes to
//!   peers once and repairs lost pushes with periodic full-state anti-entropy.
//! * `SyncAll` answers only after a round trip to every peer, retransmitting
//!   unacknowledged round messages.
//! * `HybridDeadline` runs the `SyncAll` round but answers at the deadline
//!   with whatever it has. Writes keep retransmitting after a deadline
//!   response until every peer has acknowledged them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::register::{Entry, RegisterState, Version};
use crate::sim::{ClientOp, Ctx, OpKind, Process, SimError, TimerId};
use crate::time::{NodeId, OpId, Tick};

pub const DEFAULT_ANTI_ENTROPY_PERIOD: Tick = Tick(4);
pub const DEFAULT_RETRANSMIT_PERIOD: Tick = Tick(2);

fn default_g() -> Tick {
    DEFAULT_ANTI_ENTROPY_PERIOD
}

fn default_r() -> Tick {
    DEFAULT_RETRANSMIT_PERIOD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum StrategyParams {
    LocalFirst {
        #[serde(rename = "G", default = "default_g")]
        anti_entropy_period: Tick,
    },
    SyncAll {
        #[serde(rename = "R", default = "default_r")]
        retransmit_period: Tick,
    },
    HybridDeadline {
        #[serde(rename = "D")]
        deadline: Tick,
        #[serde(rename = "R", default = "default_r")]
        retransmit_period: Tick,
    },
}

impl StrategyParams {
    pub fn local_first(anti_entropy_period: u64) -> Self {
        StrategyParams::LocalFirst {
            anti_entropy_period: Tick(anti_entropy_period),
        }
    }

    pub fn sync_all(retransmit_period: u64) -> Self {
        StrategyParams::SyncAll {
            retransmit_period: Tick(retransmit_period),
        }
    }

    pub fn hybrid(deadline: u64, retransmit_period: u64) -> Self {
        StrategyParams::HybridDeadline {
            deadline: Tick(deadline),
            retransmit_period: Tick(retransmit_period),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            StrategyParams::LocalFirst {
                anti_entropy_period,
            } if anti_entropy_period == Tick::ZERO => {
                Err("anti-entropy period G must be at least 1".into())
            }
            StrategyParams::SyncAll { retransmit_period }
            | StrategyParams::HybridDeadline {
                retransmit_period, ..
            } if retransmit_period == Tick::ZERO => {
                Err("retransmit period R must be at least 1".into())
            }
            _ => Ok(()),
        }
    }

    /// Tick-granularity allowance when comparing a run against the
    /// continuous-time bound: two message hops, plus one gossip period for
    /// anti-entropy strategies.
    pub fn slack(&self, latency: Tick) -> Tick {
        let hops = Tick(latency.get().saturating_mul(2));
        match *self {
            StrategyParams::LocalFirst {
                anti_entropy_period,
            } => hops + anti_entropy_period,
            _ => hops,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            StrategyParams::LocalFirst {
                anti_entropy_period,
            } => format!("LocalFirst(G={anti_entropy_period})"),
            StrategyParams::SyncAll { retransmit_period } => {
                format!("SyncAll(R={retransmit_period})")
            }
            StrategyParams::HybridDeadline {
                deadline,
                retransmit_period,
            } => format!("HybridDeadline(D={deadline},R={retransmit_period})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplicaMsg {
    /// One-shot write push (LocalFirst).
    Update {
        key: String,
        entry: Entry,
    },
    /// Full register contents (LocalFirst anti-entropy).
    Digest(Vec<(String, Entry)>),
    WriteReq {
        round: OpId,
        key: String,
        entry: Entry,
    },
    WriteAck {
        round: OpId,
    },
    ReadReq {
        round: OpId,
        key: String,
    },
    ReadReply {
        round: OpId,
        entry: Option<Entry>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReplicaTimer {
    AntiEntropy,
    Retransmit(OpId),
    Deadline(OpId),
}

impl ReplicaTimer {
    fn encode(self) -> TimerId {
        TimerId(match self {
            ReplicaTimer::AntiEntropy => 0,
            ReplicaTimer::Retransmit(op) => 1 + 2 * op.0,
            ReplicaTimer::Deadline(op) => 2 + 2 * op.0,
        })
    }

    fn decode(id: TimerId) -> Self {
        match id.0 {
            0 => ReplicaTimer::AntiEntropy,
            n if n % 2 == 1 => ReplicaTimer::Retransmit(OpId((n - 1) / 2)),
            n => ReplicaTimer::Deadline(OpId((n - 2) / 2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RoundKind {
    Write { entry: Entry },
    Read { best: Option<Entry> },
}

/// A request whose round to the peers is still open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRequest {
    pub op: OpId,
    pub key: String,
    pub invoke_tick: Tick,
    pub acked: BTreeSet<NodeId>,
    pub deadline: Option<Tick>,
    pub responded: bool,
    kind: RoundKind,
}

impl PendingRequest {
    pub fn kind(&self) -> OpKind {
        match self.kind {
            RoundKind::Write { .. } => OpKind::Write,
            RoundKind::Read { .. } => OpKind::Read,
        }
    }
}

/// One node of the register service under a given strategy.
#[derive(Debug, Clone)]
pub struct Replica {
    params: StrategyParams,
    register: RegisterState,
    next_seq: u64,
    rounds: BTreeMap<OpId, PendingRequest>,
}

impl Replica {
    pub fn new(params: StrategyParams) -> Self {
        Replica {
            params,
            register: RegisterState::default(),
            next_seq: 0,
            rounds: BTreeMap::new(),
        }
    }

    pub fn params(&self) -> StrategyParams {
        self.params
    }

    pub fn register(&self) -> &RegisterState {
        &self.register
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingRequest> {
        self.rounds.values()
    }

    fn retransmit_period(&self) -> Option<Tick> {
        match self.params {
            StrategyParams::LocalFirst { .. } => None,
            StrategyParams::SyncAll { retransmit_period }
            | StrategyParams::HybridDeadline {
                retransmit_period, ..
            } => Some(retransmit_period),
        }
    }

    fn merge(&mut self, ctx: &mut Ctx<'_, ReplicaMsg>, key: &str, entry: Entry) {
        if self.register.merge(key, entry) {
            ctx.applied(key, entry);
        }
    }

    fn local_write(
        &mut self,
        ctx: &mut Ctx<'_, ReplicaMsg>,
        op: &ClientOp,
    ) -> Result<Entry, SimError> {
        let value = op
            .val
            .ok_or_else(|| SimError::Strategy(format!("write {} carries no value", op.id)))?;
        let entry = Entry {
            value,
            version: Version::new(ctx.now(), ctx.me(), self.next_seq),
        };
        self.next_seq += 1;
        self.merge(ctx, &op.key, entry);
        Ok(entry)
    }

    /// The newer of a round's best reply and the current local entry.
    fn freshest(&self, key: &str, best: Option<Entry>) -> Option<Entry> {
        let local = self.register.get(key).copied();
        if local.map(|e| e.version) > best.map(|e| e.version) {
            local
        } else {
            best
        }
    }

    fn round_message(&self, round: &PendingRequest) -> ReplicaMsg {
        match round.kind {
            RoundKind::Write { entry } => ReplicaMsg::WriteReq {
                round: round.op,
                key: round.key.clone(),
                entry,
            },
            RoundKind::Read { .. } => ReplicaMsg::ReadReq {
                round: round.op,
                key: round.key.clone(),
            },
        }
    }

    fn open_round(
        &mut self,
        ctx: &mut Ctx<'_, ReplicaMsg>,
        op: &ClientOp,
        kind: RoundKind,
    ) -> Result<(), SimError> {
        let deadline = match self.params {
            StrategyParams::HybridDeadline { deadline, .. } => Some(ctx.now() + deadline),
            _ => None,
        };
        let round = PendingRequest {
            op: op.id,
            key: op.key.clone(),
            invoke_tick: ctx.now(),
            acked: BTreeSet::new(),
            deadline,
            responded: false,
            kind,
        };
        ctx.broadcast(self.round_message(&round))?;
        self.rounds.insert(op.id, round);
        if self.try_complete(ctx, op.id)? {
            return Ok(());
        }
        if let Some(period) = self.retransmit_period() {
            ctx.set_timer(period, ReplicaTimer::Retransmit(op.id).encode())?;
        }
        if let StrategyParams::HybridDeadline { deadline, .. } = self.params {
            if deadline == Tick::ZERO {
                self.respond_at_deadline(ctx, op.id)?;
            } else {
                ctx.set_timer(deadline, ReplicaTimer::Deadline(op.id).encode())?;
            }
        }
        Ok(())
    }

    /// Closes the round if every peer has answered. Returns whether the
    /// round is gone.
    fn try_complete(&mut self, ctx: &mut Ctx<'_, ReplicaMsg>, op: OpId) -> Result<bool, SimError> {
        let Some(round) = self.rounds.get(&op) else {
            return Ok(true);
        };
        if round.acked.len() + 1 < ctx.node_count() {
            return Ok(false);
        }
        let round = self.rounds.remove(&op).expect("round present");
        match round.kind {
            RoundKind::Write { .. } => {
                if !round.responded {
                    ctx.respond(op, None)?;
                }
            }
            RoundKind::Read { best } => {
                let answer = self.freshest(&round.key, best);
                if let Some(entry) = answer {
                    self.merge(ctx, &round.key, entry);
                }
                if !round.responded {
                    ctx.respond(op, answer.map(|e| e.value))?;
                }
            }
        }
        Ok(true)
    }

    fn respond_at_deadline(
        &mut self,
        ctx: &mut Ctx<'_, ReplicaMsg>,
        op: OpId,
    ) -> Result<(), SimError> {
        let Some(round) = self.rounds.get_mut(&op) else {
            return Ok(());
        };
        if round.responded {
            return Ok(());
        }
        round.responded = true;
        match round.kind {
            RoundKind::Write { .. } => ctx.respond(op, None),
            RoundKind::Read { best } => {
                let key = round.key.clone();
                self.rounds.remove(&op);
                let answer = self.freshest(&key, best);
                if let Some(entry) = answer {
                    self.merge(ctx, &key, entry);
                }
                ctx.respond(op, answer.map(|e| e.value))
            }
        }
    }
}

impl Process for Replica {
    type Msg = ReplicaMsg;

    fn on_start(&mut self, ctx: &mut Ctx<'_, ReplicaMsg>) -> Result<(), SimError> {
        if let StrategyParams::LocalFirst {
            anti_entropy_period,
        } = self.params
        {
            if ctx.node_count() > 1 {
                ctx.set_timer(anti_entropy_period, ReplicaTimer::AntiEntropy.encode())?;
            }
        }
        Ok(())
    }

    fn on_invoke(&mut self, ctx: &mut Ctx<'_, ReplicaMsg>, op: &ClientOp) -> Result<(), SimError> {
        match (self.params, op.kind) {
            (StrategyParams::LocalFirst { .. }, OpKind::Write) => {
                let entry = self.local_write(ctx, op)?;
                ctx.respond(op.id, None)?;
                ctx.broadcast(ReplicaMsg::Update {
                    key: op.key.clone(),
                    entry,
                })
            }
            (StrategyParams::LocalFirst { .. }, OpKind::Read) => {
                ctx.respond(op.id, self.register.value(&op.key))
            }
            (_, OpKind::Write) => {
                let entry = self.local_write(ctx, op)?;
                self.open_round(ctx, op, RoundKind::Write { entry })
            }
            (_, OpKind::Read) => {
                let best = self.register.get(&op.key).copied();
                self.open_round(ctx, op, RoundKind::Read { best })
            }
        }
    }

    fn on_message(
        &mut self,
        ctx: &mut Ctx<'_, ReplicaMsg>,
        src: NodeId,
        msg: ReplicaMsg,
    ) -> Result<(), SimError> {
        match msg {
            ReplicaMsg::Update { key, entry } => {
                self.merge(ctx, &key, entry);
                Ok(())
            }
            ReplicaMsg::Digest(entries) => {
                for (key, entry) in entries {
                    self.merge(ctx, &key, entry);
                }
                Ok(())
            }
            ReplicaMsg::WriteReq { round, key, entry } => {
                self.merge(ctx, &key, entry);
                ctx.send(src, ReplicaMsg::WriteAck { round }).map(|_| ())
            }
            ReplicaMsg::ReadReq { round, key } => {
                let entry = self.register.get(&key).copied();
                ctx.send(src, ReplicaMsg::ReadReply { round, entry })
                    .map(|_| ())
            }
            ReplicaMsg::WriteAck { round } => {
                let Some(pending) = self.rounds.get_mut(&round) else {
                    return Ok(());
                };
                if !matches!(pending.kind, RoundKind::Write { .. }) {
                    return Err(SimError::Strategy(format!(
                        "write ack from {src} for read round {round}"
                    )));
                }
                pending.acked.insert(src);
                self.try_complete(ctx, round).map(|_| ())
            }
            ReplicaMsg::ReadReply { round, entry } => {
                let Some(pending) = self.rounds.get_mut(&round) else {
                    return Ok(());
                };
                let RoundKind::Read { best } = &mut pending.kind else {
                    return Err(SimError::Strategy(format!(
                        "read reply from {src} for write round {round}"
                    )));
                };
                if entry.map(|e| e.version) > best.map(|e| e.version) {
                    *best = entry;
                }
                pending.acked.insert(src);
                self.try_complete(ctx, round).map(|_| ())
            }
        }
    }

    fn on_timer(&mut self, ctx: &mut Ctx<'_, ReplicaMsg>, timer: TimerId) -> Result<(), SimError> {
        match ReplicaTimer::decode(timer) {
            ReplicaTimer::AntiEntropy => {
                let StrategyParams::LocalFirst {
                    anti_entropy_period,
                } = self.params
                else {
                    return Err(SimError::Strategy(
                        "anti-entropy timer outside LocalFirst".into(),
                    ));
                };
                if !self.register.is_empty() {
                    let digest = self
                        .register
                        .iter()
                        .map(|(k, e)| (k.to_owned(), *e))
                        .collect();
                    ctx.broadcast(ReplicaMsg::Digest(digest))?;
                }
                ctx.set_timer(anti_entropy_period, timer).map(|_| ())
            }
            ReplicaTimer::Retransmit(op) => {
                let Some(round) = self.rounds.get(&op) else {
                    return Ok(());
                };
                let msg = self.round_message(round);
                let missing: Vec<NodeId> =
                    ctx.peers().filter(|p| !round.acked.contains(p)).collect();
                for peer in missing {
                    ctx.send(peer, msg.clone())?;
                }
                let period = self
                    .retransmit_period()
                    .expect("round strategies retransmit");
                ctx.set_timer(period, timer).map(|_| ())
            }
            ReplicaTimer::Deadline(op) => self.respond_at_deadline(ctx, op),
        }
    }
}
