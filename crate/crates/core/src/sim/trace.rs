//! JSON-lines event trace.
//!
//! Every record starts with `t`, `seq` and `ev`, followed by the fields of its
//! event kind in a fixed order. Serialization goes through `serde_json` with
//! derived field order, so equal traces are equal byte strings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::register::Version;
use crate::time::{NodeId, OpId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: Tick,
    pub seq: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "lowercase")]
pub enum TraceEvent {
    Invoke {
        op: OpId,
        node: NodeId,
        kind: OpKind,
        key: String,
        val: Option<i64>,
    },
    Respond {
        op: OpId,
        val: Option<i64>,
    },
    Send {
        src: NodeId,
        dst: NodeId,
        msg: u64,
    },
    Deliver {
        src: NodeId,
        dst: NodeId,
        msg: u64,
    },
    Drop {
        src: NodeId,
        dst: NodeId,
        msg: u64,
    },
    Timer {
        node: NodeId,
        timer: u64,
    },
    /// A replica's register advanced to a newer version.
    Apply {
        node: NodeId,
        key: String,
        val: Option<i64>,
        ver: Version,
    },
    /// Client operation still pending when the horizon was reached.
    Unanswered {
        op: OpId,
    },
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("trace line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// The ordered output of one simulation run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(records: Vec<TraceRecord>) -> Self {
        Trace { records }
    }

    pub(crate) fn push(&mut self, t: Tick, event: TraceEvent) {
        let seq = self.records.len() as u64;
        self.records.push(TraceRecord { t, seq, event });
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One JSON object per line, each line terminated by `\n`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 64);
        for record in &self.records {
            // Serializing these plain structs cannot fail.
            let line = serde_json::to_string(record).expect("trace record serializes");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Parses a JSON-lines trace. Blank lines are skipped; line numbers in
    /// errors are 1-based.
    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut records = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record =
                serde_json::from_str(line).map_err(|source| TraceParseError::Malformed {
                    line: idx + 1,
                    source,
                })?;
            records.push(record);
        }
        Ok(Trace { records })
    }
}
