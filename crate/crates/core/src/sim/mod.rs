//! Deterministic virtual-time event loop.
//!
//! Events are kept in a map keyed by `(time, seq)` where `seq` is assigned at
//! enqueue time, so two runs over the same inputs pop events in exactly the
//! same order. Node handlers run to completion at the tick of their event and
//! talk to the kernel through a [`Ctx`].
//!
//! Client operations wait outside the queue until the clock reaches their
//! tick and are only then assigned a `seq`. Deliveries and timers for a tick
//! are always enqueued at least one tick earlier, so at any tick they run
//! before that tick's client requests.
//!
//! The partition check happens once, when a message is sent: a message sent
//! over a reachable pair is delivered `latency` ticks later even if the link
//! fails in between, and a message sent over an unreachable pair is dropped
//! silently (the trace records the drop, the sender is not told).

pub mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::panic::{self, AssertUnwindSafe};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{PartitionSchedule, Reachability};
use crate::register::Entry;
use crate::time::{NodeId, OpId, Tick};

pub use trace::{OpKind, Trace, TraceEvent, TraceParseError, TraceRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{node} sent a message to itself")]
    SelfSend { node: NodeId },
    #[error("{node} addressed unknown node {dst}")]
    UnknownPeer { node: NodeId, dst: NodeId },
    #[error("{node} set timer {timer} with zero delay")]
    ZeroDelay { node: NodeId, timer: u64 },
    #[error("{node} responded to {op}, which is not pending at that node")]
    NotPending { node: NodeId, op: OpId },
    #[error("duplicate operation id {0}")]
    DuplicateOp(OpId),
    #[error("{0}")]
    Strategy(String),
    #[error("handling {event}: {source}")]
    Handler {
        event: String,
        #[source]
        source: Box<SimError>,
    },
    #[error("handler panicked while handling {event}: {message}")]
    Panic { event: String, message: String },
}

/// A client request addressed to one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientOp {
    pub id: OpId,
    pub node: NodeId,
    pub kind: OpKind,
    pub key: String,
    /// Value to write; `None` for reads.
    pub val: Option<i64>,
}

/// Strategy-chosen timer identifier, opaque to the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerId(pub u64);

/// A node state machine driven by the kernel.
pub trait Process {
    type Msg: Clone + fmt::Debug;

    /// Called once per node at tick 0, before any other event.
    fn on_start(&mut self, _ctx: &mut Ctx<'_, Self::Msg>) -> Result<(), SimError> {
        Ok(())
    }

    fn on_invoke(&mut self, ctx: &mut Ctx<'_, Self::Msg>, op: &ClientOp) -> Result<(), SimError>;

    fn on_message(
        &mut self,
        ctx: &mut Ctx<'_, Self::Msg>,
        src: NodeId,
        msg: Self::Msg,
    ) -> Result<(), SimError>;

    fn on_timer(&mut self, ctx: &mut Ctx<'_, Self::Msg>, timer: TimerId) -> Result<(), SimError>;
}

/// Fixed parameters of one run.
#[derive(Debug, Clone)]
pub struct SimSettings {
    pub latency: Tick,
    pub horizon: Tick,
    pub schedule: PartitionSchedule,
    pub reachability: Reachability,
}

enum Scheduled<M> {
    Invoke(ClientOp),
    Deliver {
        msg: u64,
        src: NodeId,
        dst: NodeId,
        payload: M,
    },
    Timer {
        node: NodeId,
        timer: TimerId,
    },
}

impl<M> Scheduled<M> {
    fn describe(&self, t: Tick) -> String {
        match self {
            Scheduled::Invoke(op) => format!("invoke {} at {} (tick {t})", op.id, op.node),
            Scheduled::Deliver { msg, src, dst, .. } => {
                format!("deliver msg {msg} {src}->{dst} (tick {t})")
            }
            Scheduled::Timer { node, timer } => {
                format!("timer {} at {node} (tick {t})", timer.0)
            }
        }
    }
}

struct Kernel<M> {
    now: Tick,
    settings: SimSettings,
    queue: BTreeMap<(Tick, u64), Scheduled<M>>,
    workload: BTreeMap<(Tick, u64), ClientOp>,
    next_event: u64,
    next_msg: u64,
    trace: Trace,
    pending: BTreeMap<OpId, NodeId>,
    submitted: BTreeSet<OpId>,
}

impl<M: Clone> Kernel<M> {
    fn node_count(&self) -> usize {
        self.settings.schedule.node_count()
    }

    fn enqueue(&mut self, at: Tick, event: Scheduled<M>) {
        let seq = self.next_event;
        self.next_event += 1;
        self.queue.insert((at, seq), event);
    }

    fn send(&mut self, src: NodeId, dst: NodeId, payload: M) -> Result<Option<Tick>, SimError> {
        if src == dst {
            return Err(SimError::SelfSend { node: src });
        }
        if dst.index() >= self.node_count() {
            return Err(SimError::UnknownPeer { node: src, dst });
        }
        let msg = self.next_msg;
        self.next_msg += 1;
        let now = self.now;
        self.trace.push(now, TraceEvent::Send { src, dst, msg });
        let up = self
            .settings
            .schedule
            .can_communicate(self.settings.reachability, now, src, dst)
            .map_err(|e| SimError::Config(e.to_string()))?;
        if up {
            let at = now + self.settings.latency;
            self.enqueue(
                at,
                Scheduled::Deliver {
                    msg,
                    src,
                    dst,
                    payload,
                },
            );
            Ok(Some(at))
        } else {
            self.trace.push(now, TraceEvent::Drop { src, dst, msg });
            Ok(None)
        }
    }

    fn set_timer(&mut self, node: NodeId, delay: Tick, timer: TimerId) -> Result<Tick, SimError> {
        if delay == Tick::ZERO {
            return Err(SimError::ZeroDelay {
                node,
                timer: timer.0,
            });
        }
        let at = self.now + delay;
        self.enqueue(at, Scheduled::Timer { node, timer });
        Ok(at)
    }

    fn respond(&mut self, node: NodeId, op: OpId, val: Option<i64>) -> Result<(), SimError> {
        match self.pending.get(&op) {
            Some(&owner) if owner == node => {
                self.pending.remove(&op);
                self.trace.push(self.now, TraceEvent::Respond { op, val });
                Ok(())
            }
            _ => Err(SimError::NotPending { node, op }),
        }
    }
}

/// A node's handle on the kernel while one of its handlers runs.
pub struct Ctx<'a, M> {
    kernel: &'a mut Kernel<M>,
    node: NodeId,
}

impl<M: Clone> Ctx<'_, M> {
    pub fn now(&self) -> Tick {
        self.kernel.now
    }

    pub fn me(&self) -> NodeId {
        self.node
    }

    pub fn node_count(&self) -> usize {
        self.kernel.node_count()
    }

    /// All other nodes, in id order.
    pub fn peers(&self) -> impl Iterator<Item = NodeId> + 'static {
        let me = self.node;
        (0..self.kernel.node_count() as u32)
            .map(NodeId)
            .filter(move |&n| n != me)
    }

    /// Returns the delivery tick, or `None` when the message was dropped.
    pub fn send(&mut self, dst: NodeId, payload: M) -> Result<Option<Tick>, SimError> {
        self.kernel.send(self.node, dst, payload)
    }

    pub fn broadcast(&mut self, payload: M) -> Result<(), SimError> {
        for peer in self.peers() {
            self.kernel.send(self.node, peer, payload.clone())?;
        }
        Ok(())
    }

    /// Schedules `timer` to fire at `now + delay`; `delay` must be at least 1.
    pub fn set_timer(&mut self, delay: Tick, timer: TimerId) -> Result<Tick, SimError> {
        self.kernel.set_timer(self.node, delay, timer)
    }

    pub fn respond(&mut self, op: OpId, val: Option<i64>) -> Result<(), SimError> {
        self.kernel.respond(self.node, op, val)
    }

    /// Records that this node's register for `key` moved to `entry`.
    pub fn applied(&mut self, key: &str, entry: Entry) {
        let now = self.kernel.now;
        self.kernel.trace.push(
            now,
            TraceEvent::Apply {
                node: self.node,
                key: key.to_owned(),
                val: Some(entry.value),
                ver: entry.version,
            },
        );
    }
}

/// Final state of a finished run.
#[derive(Debug)]
pub struct SimOutcome<P> {
    pub trace: Trace,
    pub nodes: Vec<P>,
}

pub struct Simulation<P: Process> {
    nodes: Vec<P>,
    kernel: Kernel<P::Msg>,
    started: bool,
}

impl<P: Process> Simulation<P> {
    pub fn new(settings: SimSettings, nodes: Vec<P>) -> Result<Self, SimError> {
        if nodes.is_empty() {
            return Err(SimError::Config("scenario has zero nodes".into()));
        }
        if nodes.len() != settings.schedule.node_count() {
            return Err(SimError::Config(format!(
                "{} node handlers for a {}-node schedule",
                nodes.len(),
                settings.schedule.node_count()
            )));
        }
        if settings.latency == Tick::ZERO {
            return Err(SimError::Config(
                "message latency must be at least 1".into(),
            ));
        }
        Ok(Simulation {
            nodes,
            kernel: Kernel {
                now: Tick::ZERO,
                settings,
                queue: BTreeMap::new(),
                workload: BTreeMap::new(),
                next_event: 0,
                next_msg: 0,
                trace: Trace::default(),
                pending: BTreeMap::new(),
                submitted: BTreeSet::new(),
            },
            started: false,
        })
    }

    pub fn now(&self) -> Tick {
        self.kernel.now
    }

    pub fn nodes(&self) -> &[P] {
        &self.nodes
    }

    pub fn trace(&self) -> &Trace {
        &self.kernel.trace
    }

    /// Schedules a client operation for dispatch at tick `at`.
    pub fn submit(&mut self, at: Tick, op: ClientOp) -> Result<(), SimError> {
        if op.node.index() >= self.nodes.len() {
            return Err(SimError::Config(format!(
                "{} addressed to unknown node {}",
                op.id, op.node
            )));
        }
        if at >= self.kernel.settings.horizon {
            return Err(SimError::Config(format!(
                "{} scheduled at tick {at}, not before horizon {}",
                op.id, self.kernel.settings.horizon
            )));
        }
        if at < self.kernel.now {
            return Err(SimError::Config(format!(
                "{} scheduled in the past (tick {at})",
                op.id
            )));
        }
        if !self.kernel.submitted.insert(op.id) {
            return Err(SimError::DuplicateOp(op.id));
        }
        let order = self.kernel.submitted.len() as u64;
        self.kernel.workload.insert((at, order), op);
        Ok(())
    }

    /// Sends `payload` from `src` to `dst` at the current tick.
    pub fn send(
        &mut self,
        src: NodeId,
        dst: NodeId,
        payload: P::Msg,
    ) -> Result<Option<Tick>, SimError> {
        self.kernel.send(src, dst, payload)
    }

    pub fn set_timer(
        &mut self,
        node: NodeId,
        delay: Tick,
        timer: TimerId,
    ) -> Result<Tick, SimError> {
        self.kernel.set_timer(node, delay, timer)
    }

    fn start(&mut self) -> Result<(), SimError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        for idx in 0..self.nodes.len() {
            let event = format!("start of n{idx}");
            let node = &mut self.nodes[idx];
            let mut ctx = Ctx {
                kernel: &mut self.kernel,
                node: NodeId(idx as u32),
            };
            guard(event, || node.on_start(&mut ctx))?;
        }
        Ok(())
    }

    /// Moves the earliest batch of client operations into the queue once no
    /// queued event precedes them.
    fn release_due_ops(&mut self) {
        let kernel = &mut self.kernel;
        let Some(&(due, _)) = kernel.workload.keys().next() else {
            return;
        };
        if kernel.queue.keys().next().is_some_and(|&(t, _)| t < due) {
            return;
        }
        while let Some(entry) = kernel.workload.first_entry() {
            if entry.key().0 != due {
                break;
            }
            let op = entry.remove();
            kernel.enqueue(due, Scheduled::Invoke(op));
        }
    }

    /// Processes the next event before the horizon. Returns `false` once
    /// there is nothing left to do.
    pub fn step(&mut self) -> Result<bool, SimError> {
        self.start()?;
        self.release_due_ops();
        let horizon = self.kernel.settings.horizon;
        let Some(entry) = self.kernel.queue.first_entry() else {
            return Ok(false);
        };
        let (at, _) = *entry.key();
        if at >= horizon {
            return Ok(false);
        }
        let event = entry.remove();
        self.kernel.now = at;
        let label = event.describe(at);
        match event {
            Scheduled::Invoke(op) => {
                self.kernel.trace.push(
                    at,
                    TraceEvent::Invoke {
                        op: op.id,
                        node: op.node,
                        kind: op.kind,
                        key: op.key.clone(),
                        val: op.val,
                    },
                );
                self.kernel.pending.insert(op.id, op.node);
                let node = &mut self.nodes[op.node.index()];
                let mut ctx = Ctx {
                    kernel: &mut self.kernel,
                    node: op.node,
                };
                guard(label, || node.on_invoke(&mut ctx, &op))?;
            }
            Scheduled::Deliver {
                msg,
                src,
                dst,
                payload,
            } => {
                self.kernel
                    .trace
                    .push(at, TraceEvent::Deliver { src, dst, msg });
                let node = &mut self.nodes[dst.index()];
                let mut ctx = Ctx {
                    kernel: &mut self.kernel,
                    node: dst,
                };
                guard(label, || node.on_message(&mut ctx, src, payload))?;
            }
            Scheduled::Timer { node: id, timer } => {
                self.kernel.trace.push(
                    at,
                    TraceEvent::Timer {
                        node: id,
                        timer: timer.0,
                    },
                );
                let node = &mut self.nodes[id.index()];
                let mut ctx = Ctx {
                    kernel: &mut self.kernel,
                    node: id,
                };
                guard(label, || node.on_timer(&mut ctx, timer))?;
            }
        }
        Ok(true)
    }

    /// Runs to the horizon. Messages still in flight are recorded as drops
    /// at the horizon and pending operations as unanswered.
    pub fn finish(mut self) -> Result<SimOutcome<P>, SimError> {
        while self.step()? {}
        let horizon = self.kernel.settings.horizon;
        let leftover = std::mem::take(&mut self.kernel.queue);
        for (_, event) in leftover {
            if let Scheduled::Deliver { msg, src, dst, .. } = event {
                self.kernel
                    .trace
                    .push(horizon, TraceEvent::Drop { src, dst, msg });
            }
        }
        for op in std::mem::take(&mut self.kernel.pending).into_keys() {
            self.kernel
                .trace
                .push(horizon, TraceEvent::Unanswered { op });
        }
        Ok(SimOutcome {
            trace: self.kernel.trace,
            nodes: self.nodes,
        })
    }
}

fn guard(event: String, f: impl FnOnce() -> Result<(), SimError>) -> Result<(), SimError> {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Ok(()),
        Ok(Err(source)) => Err(SimError::Handler {
            event,
            source: Box::new(source),
        }),
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "non-string panic payload".into());
            Err(SimError::Panic { event, message })
        }
    }
}
