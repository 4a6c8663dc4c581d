//! Bounded-staleness and response-time checks over a [`History`].
//!
//! A read that responds at tick `T` under a staleness bound `tc` must reflect
//! every write invoked at or before `T - tc`: the latest such write is the
//! *baseline*. Writes invoked in `(T - tc, T]` are *optional*; the read may
//! return any of their values or the baseline's. With no baseline write the
//! initial (absent) value is allowed instead.
//!
//! The boundary is closed, so at `tc = 0` a write invoked at the read's own
//! tick is mandatory; from `tc = 1` on it is optional.
//!
//! The reference tick is the response tick by default. [`ReadReference::Invoke`]
//! measures the window from the read's invoke tick instead; the optional
//! window still extends to the response.

pub mod history;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::sim::OpKind;
use crate::time::{OpId, Tick};

pub use history::{extract_history, history_from_jsonl, History, HistoryError, OperationRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReadReference {
    #[default]
    Response,
    Invoke,
}

impl ReadReference {
    fn tick(self, read: &OperationRecord) -> Option<Tick> {
        match self {
            ReadReference::Response => read.response,
            ReadReference::Invoke => read.response.map(|_| read.invoke),
        }
    }
}

/// A latency that may be unbounded because some operation never completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Latency {
    Finite(Tick),
    Infinite,
}

impl Latency {
    pub fn finite(self) -> Option<Tick> {
        match self {
            Latency::Finite(t) => Some(t),
            Latency::Infinite => None,
        }
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Latency::Finite(t) => t.fmt(f),
            Latency::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Latency {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Latency::Finite(t) => s.serialize_u64(t.get()),
            Latency::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Latency {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Ticks(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Ticks(t) => Ok(Latency::Finite(Tick(t))),
            Repr::Word(w) if w == "inf" => Ok(Latency::Infinite),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected tick count or \"inf\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Availability,
    Consistency,
    Integrity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub op: OpId,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub empirical_ta: Latency,
    pub empirical_tc_min: Tick,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("{op} returned {value}, which no write to {key:?} produced by its response; no staleness bound admits it")]
    Integrity { op: OpId, key: String, value: i64 },
}

/// Values a read of `key` responding at `response` may return under `tc`.
/// `None` stands for the initial value.
pub fn valid_read_values(
    history: &History,
    key: &str,
    response: Tick,
    tc: Tick,
) -> BTreeSet<Option<i64>> {
    valid_read_values_from(history, key, response, response, tc)
}

/// As [`valid_read_values`], with the baseline boundary measured from
/// `reference` and the optional window closing at `response`.
pub fn valid_read_values_from(
    history: &History,
    key: &str,
    reference: Tick,
    response: Tick,
    tc: Tick,
) -> BTreeSet<Option<i64>> {
    let boundary = reference.checked_sub(tc);
    let mut baseline = None;
    let mut allowed = BTreeSet::new();
    for w in history.writes(key) {
        if w.invoke > response {
            break;
        }
        match boundary {
            Some(b) if w.invoke <= b => baseline = Some(w.value),
            _ => {
                allowed.insert(w.value);
            }
        }
    }
    allowed.insert(baseline.flatten());
    allowed
}

/// Least `tc` under which `value` is a legal answer for a read of `key`
/// with the given reference and response ticks, or `None` if no write to
/// `key` up to `response` produced `value`.
///
/// A write is legal exactly when the boundary `reference - tc` falls before
/// the next write in key order (it is then either the baseline or
/// optional), so its threshold is `reference - next + 1`. The initial value
/// is legal while the boundary precedes the first write.
fn read_threshold(
    history: &History,
    key: &str,
    value: Option<i64>,
    reference: Tick,
    response: Tick,
) -> Option<Tick> {
    let past_boundary = |next: Option<Tick>| match next {
        Some(next) => (reference + Tick(1)) - next,
        None => Tick::ZERO,
    };
    let writes: Vec<&OperationRecord> = history
        .writes(key)
        .take_while(|w| w.invoke <= response)
        .collect();
    let mut best: Option<Tick> = None;
    if value.is_none() {
        best = Some(past_boundary(writes.first().map(|w| w.invoke)));
    }
    for (i, w) in writes.iter().enumerate() {
        if w.value == value {
            let need = past_boundary(writes.get(i + 1).map(|n| n.invoke));
            best = Some(best.map_or(need, |b| b.min(need)));
        }
    }
    best
}

/// Checks declared bounds with reads referenced at their response tick.
pub fn check(history: &History, declared_tc: Tick, declared_ta: Tick) -> CheckReport {
    check_with(history, declared_tc, declared_ta, ReadReference::Response)
}

pub fn check_with(
    history: &History,
    declared_tc: Tick,
    declared_ta: Tick,
    reference: ReadReference,
) -> CheckReport {
    let mut violations = Vec::new();
    let mut worst_latency = Latency::Finite(Tick::ZERO);
    let mut tc_min = Tick::ZERO;

    for rec in history.ops() {
        let latency = match rec.latency() {
            Some(l) => Latency::Finite(l),
            None => Latency::Infinite,
        };
        worst_latency = worst_latency.max(latency);
        match latency {
            Latency::Infinite => violations.push(Violation {
                op: rec.op,
                kind: ViolationKind::Availability,
                detail: format!("invoked at {} and never answered", rec.invoke),
            }),
            Latency::Finite(l) if l > declared_ta => violations.push(Violation {
                op: rec.op,
                kind: ViolationKind::Availability,
                detail: format!("latency {l} exceeds declared {declared_ta}"),
            }),
            _ => {}
        }

        if rec.kind != OpKind::Read {
            continue;
        }
        let (Some(response), Some(refer)) = (rec.response, reference.tick(rec)) else {
            continue;
        };
        match read_threshold(history, &rec.key, rec.value, refer, response) {
            None => violations.push(Violation {
                op: rec.op,
                kind: ViolationKind::Integrity,
                detail: format!(
                    "returned {} for {:?}, which no earlier write produced",
                    show(rec.value),
                    rec.key
                ),
            }),
            Some(need) => {
                tc_min = tc_min.max(need);
                if need > declared_tc {
                    violations.push(Violation {
                        op: rec.op,
                        kind: ViolationKind::Consistency,
                        detail: format!(
                            "returned {} for {:?} at {response}; legal only with tc >= {need}, declared {declared_tc}",
                            show(rec.value),
                            rec.key
                        ),
                    });
                }
            }
        }
    }

    CheckReport {
        empirical_ta: worst_latency,
        empirical_tc_min: tc_min,
        violations,
    }
}

/// Smallest `tc` under which every read in `history` is consistent.
pub fn min_tc(history: &History) -> Result<Tick, CheckError> {
    min_tc_with(history, ReadReference::Response)
}

pub fn min_tc_with(history: &History, reference: ReadReference) -> Result<Tick, CheckError> {
    let mut worst = Tick::ZERO;
    for rec in history.reads() {
        let (Some(response), Some(refer)) = (rec.response, reference.tick(rec)) else {
            continue;
        };
        match read_threshold(history, &rec.key, rec.value, refer, response) {
            Some(need) => worst = worst.max(need),
            None => {
                return Err(CheckError::Integrity {
                    op: rec.op,
                    key: rec.key.clone(),
                    value: rec.value.unwrap_or_default(),
                })
            }
        }
    }
    Ok(worst)
}

/// Whether a run is on or above the line `tc + ta = tp`, allowing `slack`
/// ticks for discretization. Unbounded latency satisfies it trivially.
pub fn check_bound(report: &CheckReport, tp: Tick, slack: Tick) -> bool {
    match report.empirical_ta {
        Latency::Infinite => true,
        Latency::Finite(ta) => report.empirical_tc_min + ta >= tp - slack,
    }
}

fn show(value: Option<i64>) -> String {
    value.map_or_else(|| "<initial>".to_owned(), |v| v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn figure_writes() -> Vec<OperationRecord> {
        vec![
            OperationRecord::write(0, 0, "A", 2, 0, 0),
            OperationRecord::write(1, 0, "A", 5, 3, 3),
            OperationRecord::write(2, 0, "A", 4, 6, 6),
        ]
    }

    fn with_reads(reads: &[(Option<i64>, u64)]) -> History {
        let mut ops = figure_writes();
        for (i, &(v, t)) in reads.iter().enumerate() {
            ops.push(OperationRecord::read(10 + i as u64, 1, "A", v, t, t));
        }
        History::from_records(ops).unwrap()
    }

    fn set(values: &[Option<i64>]) -> BTreeSet<Option<i64>> {
        values.iter().copied().collect()
    }

    #[test]
    fn figure_window_sets() {
        let h = with_reads(&[]);
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(8)),
            set(&[Some(2), Some(5), Some(4)])
        );
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(0)),
            set(&[Some(4)])
        );
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(3)),
            set(&[Some(5), Some(4)])
        );
    }

    #[test]
    fn window_reaching_before_first_write_allows_initial() {
        let h = with_reads(&[]);
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(9)),
            set(&[None, Some(2), Some(5), Some(4)])
        );
        assert_eq!(valid_read_values(&h, "B", Tick(8), Tick(0)), set(&[None]));
    }

    #[test]
    fn same_tick_write_is_mandatory_only_at_zero() {
        let h = History::from_records(vec![
            OperationRecord::write(0, 0, "A", 1, 2, 2),
            OperationRecord::write(1, 0, "A", 7, 8, 8),
        ])
        .unwrap();
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(0)),
            set(&[Some(7)])
        );
        assert_eq!(
            valid_read_values(&h, "A", Tick(8), Tick(1)),
            set(&[Some(1), Some(7)])
        );
    }

    #[test]
    fn writes_after_the_response_are_never_valid() {
        let h = with_reads(&[]);
        assert_eq!(
            valid_read_values(&h, "A", Tick(4), Tick(10)),
            set(&[None, Some(2), Some(5)])
        );
    }

    #[test]
    fn repeated_reads_are_clean_under_large_tc() {
        let values = [2, 5, 2, 2, 4, 5, 4, 4, 4];
        let reads: Vec<_> = values.iter().map(|&v| (Some(v), 8)).collect();
        let h = with_reads(&reads);
        let report = check(&h, Tick(8), Tick::MAX);
        assert!(report.is_clean(), "{:?}", report.violations);
    }

    #[test]
    fn stale_read_min_tc() {
        let h = with_reads(&[(Some(2), 8)]);
        assert_eq!(min_tc(&h).unwrap(), Tick(6));
        assert!(check(&h, Tick(6), Tick::MAX).is_clean());
        assert_eq!(
            check(&h, Tick(5), Tick::MAX).count(ViolationKind::Consistency),
            1
        );
    }

    #[test]
    fn fresh_reads_need_zero() {
        let h = with_reads(&[(Some(4), 8), (Some(5), 3), (Some(2), 1)]);
        assert_eq!(min_tc(&h).unwrap(), Tick(0));
    }

    #[test]
    fn unknown_value_is_integrity() {
        let h = with_reads(&[(Some(99), 8)]);
        let report = check(&h, Tick(100), Tick(100));
        assert_eq!(report.count(ViolationKind::Integrity), 1);
        assert_eq!(report.count(ViolationKind::Consistency), 0);
        assert!(matches!(min_tc(&h), Err(CheckError::Integrity { .. })));
    }

    #[test]
    fn unanswered_is_availability_and_infinite() {
        let mut ops = figure_writes();
        ops.push(OperationRecord {
            response: None,
            ..OperationRecord::read(9, 1, "A", None, 7, 7)
        });
        let h = History::from_records(ops).unwrap();
        let report = check(&h, Tick(0), Tick(1000));
        assert_eq!(report.empirical_ta, Latency::Infinite);
        assert_eq!(report.count(ViolationKind::Availability), 1);
        assert!(check_bound(&report, Tick(50), Tick(0)));
    }

    #[test]
    fn latency_over_bound_is_availability() {
        let h = History::from_records(vec![
            OperationRecord::write(0, 0, "A", 1, 2, 9),
            OperationRecord::read(1, 1, "A", Some(1), 10, 12),
        ])
        .unwrap();
        let report = check(&h, Tick(0), Tick(3));
        assert_eq!(report.empirical_ta, Latency::Finite(Tick(7)));
        assert_eq!(report.count(ViolationKind::Availability), 1);
        assert!(check(&h, Tick(0), Tick(7)).is_clean());
    }

    #[test]
    fn invoke_reference_measures_from_invoke() {
        // read invoked at 4, answered at 8 with 5: stale by 2 from invoke
        let h = History::from_records(vec![
            OperationRecord::write(0, 0, "A", 5, 0, 0),
            OperationRecord::write(1, 0, "A", 4, 3, 3),
            OperationRecord::read(2, 1, "A", Some(5), 4, 8),
        ])
        .unwrap();
        assert_eq!(min_tc(&h).unwrap(), Tick(6));
        assert_eq!(min_tc_with(&h, ReadReference::Invoke).unwrap(), Tick(2));
    }

    #[test]
    fn bound_check() {
        let report = CheckReport {
            empirical_ta: Latency::Finite(Tick(3)),
            empirical_tc_min: Tick(5),
            violations: vec![],
        };
        assert!(check_bound(&report, Tick(0), Tick(0)));
        assert!(check_bound(&report, Tick(8), Tick(0)));
        assert!(!check_bound(&report, Tick(9), Tick(0)));
        assert!(check_bound(&report, Tick(10), Tick(2)));
    }

    #[test]
    fn report_json_shape() {
        let report = CheckReport {
            empirical_ta: Latency::Infinite,
            empirical_tc_min: Tick(4),
            violations: vec![Violation {
                op: OpId(3),
                kind: ViolationKind::Consistency,
                detail: "x".into(),
            }],
        };
        assert_eq!(
            report.to_json(),
            r#"{"empirical_ta":"inf","empirical_tc_min":4,"violations":[{"op":3,"kind":"consistency","detail":"x"}]}"#
        );
        let back: CheckReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
}
