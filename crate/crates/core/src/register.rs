//! Keyed last-writer-wins register.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::time::{NodeId, Tick};

/// Version of a write. Ordered lexicographically by `(write_tick, writer, seq)`,
/// so concurrent writes at one tick resolve in favour of the higher node id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Version(pub Tick, pub NodeId, pub u64);

impl Version {
    pub fn new(write_tick: Tick, writer: NodeId, seq: u64) -> Self {
        Version(write_tick, writer, seq)
    }

    pub fn write_tick(&self) -> Tick {
        self.0
    }

    pub fn writer(&self) -> NodeId {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub value: i64,
    pub version: Version,
}

/// Per-key register contents of one replica. Absent keys read as the initial
/// (unwritten) value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegisterState {
    entries: BTreeMap<String, Entry>,
}

impl RegisterState {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    pub fn value(&self, key: &str) -> Option<i64> {
        self.entries.get(key).map(|e| e.value)
    }

    /// Keeps whichever of the stored and incoming entries has the larger
    /// version. Returns `true` when the incoming entry replaced the state.
    pub fn merge(&mut self, key: &str, incoming: Entry) -> bool {
        match self.entries.get_mut(key) {
            Some(current) if current.version >= incoming.version => false,
            Some(current) => {
                *current = incoming;
                true
            }
            None => {
                self.entries.insert(key.to_owned(), incoming);
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Entry)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(value: i64, tick: u64, writer: u32, seq: u64) -> Entry {
        Entry {
            value,
            version: Version::new(Tick(tick), NodeId(writer), seq),
        }
    }

    #[test]
    fn older_update_is_ignored() {
        let mut reg = RegisterState::default();
        assert!(reg.merge("A", entry(5, 10, 0, 0)));
        assert!(!reg.merge("A", entry(2, 3, 1, 0)));
        assert_eq!(reg.value("A"), Some(5));
    }

    #[test]
    fn equal_tick_resolves_by_writer() {
        let mut reg = RegisterState::default();
        reg.merge("A", entry(20, 7, 2, 0));
        assert!(!reg.merge("A", entry(10, 7, 1, 5)));
        assert_eq!(reg.value("A"), Some(20));

        let mut other = RegisterState::default();
        other.merge("A", entry(10, 7, 1, 5));
        assert!(other.merge("A", entry(20, 7, 2, 0)));
        assert_eq!(other.value("A"), Some(20));
    }

    proptest! {
        #[test]
        fn merge_is_monotone_and_order_free(
            writes in proptest::collection::vec((0i64..50, 0u64..20, 0u32..3, 0u64..4), 1..20)
        ) {
            let entries: Vec<Entry> = writes.iter().map(|&(v, t, w, s)| entry(v, t, w, s)).collect();
            let mut forward = RegisterState::default();
            let mut last = None;
            for e in &entries {
                forward.merge("k", *e);
                let now = forward.get("k").map(|e| e.version);
                prop_assert!(now >= last);
                last = now;
            }
            let mut backward = RegisterState::default();
            for e in entries.iter().rev() {
                backward.merge("k", *e);
            }
            let max = entries.iter().map(|e| e.version).max();
            prop_assert_eq!(forward.get("k").map(|e| e.version), max);
            prop_assert_eq!(backward.get("k").map(|e| e.version), max);
        }
    }
}
