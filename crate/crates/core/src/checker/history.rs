//! Client-visible operation history extracted from a trace.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::sim::{OpKind, Trace, TraceEvent, TraceParseError};
use crate::time::{NodeId, OpId, Tick};

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error(transparent)]
    Parse(#[from] TraceParseError),
    #[error("integrity: duplicate operation id {0}")]
    DuplicateOp(OpId),
    #[error("integrity: response for {0} without a matching invoke")]
    ResponseWithoutInvoke(OpId),
    #[error("integrity: {0} completed more than once")]
    DuplicateCompletion(OpId),
    #[error("integrity: {op} responds at {response}, before its invoke at {invoke}")]
    ResponseBeforeInvoke {
        op: OpId,
        invoke: Tick,
        response: Tick,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationRecord {
    pub op: OpId,
    pub kind: OpKind,
    pub key: String,
    /// Written value for writes, returned value for reads (`None` is the
    /// initial, never-written value).
    pub value: Option<i64>,
    pub node: NodeId,
    pub invoke: Tick,
    /// `None` when the operation was still pending at the horizon.
    pub response: Option<Tick>,
}

impl OperationRecord {
    pub fn write(op: u64, node: u32, key: &str, value: i64, invoke: u64, response: u64) -> Self {
        OperationRecord {
            op: OpId(op),
            kind: OpKind::Write,
            key: key.to_owned(),
            value: Some(value),
            node: NodeId(node),
            invoke: Tick(invoke),
            response: Some(Tick(response)),
        }
    }

    pub fn read(
        op: u64,
        node: u32,
        key: &str,
        value: Option<i64>,
        invoke: u64,
        response: u64,
    ) -> Self {
        OperationRecord {
            op: OpId(op),
            kind: OpKind::Read,
            key: key.to_owned(),
            value,
            node: NodeId(node),
            invoke: Tick(invoke),
            response: Some(Tick(response)),
        }
    }

    pub fn latency(&self) -> Option<Tick> {
        self.response.map(|r| r - self.invoke)
    }
}

/// Operations plus, per key, the writes in their total order
/// `(invoke tick, writer, op id)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    ops: Vec<OperationRecord>,
    writes: BTreeMap<String, Vec<usize>>,
}

impl History {
    pub fn from_records(ops: Vec<OperationRecord>) -> Result<Self, HistoryError> {
        let mut seen = HashMap::with_capacity(ops.len());
        for (idx, rec) in ops.iter().enumerate() {
            if seen.insert(rec.op, idx).is_some() {
                return Err(HistoryError::DuplicateOp(rec.op));
            }
            if let Some(response) = rec.response {
                if response < rec.invoke {
                    return Err(HistoryError::ResponseBeforeInvoke {
                        op: rec.op,
                        invoke: rec.invoke,
                        response,
                    });
                }
            }
        }
        let mut writes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, rec) in ops.iter().enumerate() {
            if rec.kind == OpKind::Write {
                writes.entry(rec.key.clone()).or_default().push(idx);
            }
        }
        for order in writes.values_mut() {
            order.sort_by_key(|&i| (ops[i].invoke, ops[i].node, ops[i].op));
        }
        Ok(History { ops, writes })
    }

    pub fn ops(&self) -> &[OperationRecord] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Writes to `key` in total order.
    pub fn writes(&self, key: &str) -> impl Iterator<Item = &OperationRecord> + '_ {
        self.writes
            .get(key)
            .into_iter()
            .flatten()
            .map(move |&i| &self.ops[i])
    }

    pub fn reads(&self) -> impl Iterator<Item = &OperationRecord> + '_ {
        self.ops.iter().filter(|r| r.kind == OpKind::Read)
    }
}

/// Builds the history of client operations recorded in `trace`.
pub fn extract_history(trace: &Trace) -> Result<History, HistoryError> {
    let mut ops: Vec<OperationRecord> = Vec::new();
    let mut index: HashMap<OpId, usize> = HashMap::new();
    let mut closed: HashMap<OpId, ()> = HashMap::new();
    for record in trace.records() {
        match &record.event {
            TraceEvent::Invoke {
                op,
                node,
                kind,
                key,
                val,
            } => {
                if index.insert(*op, ops.len()).is_some() {
                    return Err(HistoryError::DuplicateOp(*op));
                }
                ops.push(OperationRecord {
                    op: *op,
                    kind: *kind,
                    key: key.clone(),
                    value: match kind {
                        OpKind::Write => *val,
                        OpKind::Read => None,
                    },
                    node: *node,
                    invoke: record.t,
                    response: None,
                });
            }
            TraceEvent::Respond { op, val } => {
                let idx = *index
                    .get(op)
                    .ok_or(HistoryError::ResponseWithoutInvoke(*op))?;
                if closed.insert(*op, ()).is_some() {
                    return Err(HistoryError::DuplicateCompletion(*op));
                }
                let rec = &mut ops[idx];
                rec.response = Some(record.t);
                if rec.kind == OpKind::Read {
                    rec.value = *val;
                }
            }
            TraceEvent::Unanswered { op } => {
                if !index.contains_key(op) {
                    return Err(HistoryError::ResponseWithoutInvoke(*op));
                }
                if closed.insert(*op, ()).is_some() {
                    return Err(HistoryError::DuplicateCompletion(*op));
                }
            }
            _ => {}
        }
    }
    History::from_records(ops)
}

/// Parses a JSON-lines trace and extracts its history.
pub fn history_from_jsonl(text: &str) -> Result<History, HistoryError> {
    extract_history(&Trace::from_jsonl(text)?)
}
