//! Link outages, reachability, and the partition bound `T_P` of a schedule.
//!
//! A schedule is a set of symmetric outages on individual links, each over a
//! half-open tick interval. Two nodes can communicate at a tick when a path of
//! live links joins them ([`Reachability::Path`], the default), or, in the
//! strict comparison mode, when their direct link is live.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{NodeId, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("link endpoints must differ, got {0} twice")]
    SelfLink(NodeId),
    #[error("node {node} out of range for a {node_count}-node schedule")]
    UnknownNode { node: NodeId, node_count: usize },
    #[error("outage on {a}-{b} has empty interval [{start}, {end})")]
    EmptyInterval {
        a: NodeId,
        b: NodeId,
        start: Tick,
        end: Tick,
    },
}

/// One link down over `[start, end)`, in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkOutage {
    pub a: NodeId,
    pub b: NodeId,
    pub start: Tick,
    pub end: Tick,
}

impl LinkOutage {
    pub fn new(a: NodeId, b: NodeId, start: Tick, end: Tick) -> Self {
        LinkOutage { a, b, start, end }
    }

    fn covers(&self, t: Tick) -> bool {
        self.start <= t && t < self.end
    }

    fn joins(&self, x: NodeId, y: NodeId) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }
}

/// How "able to communicate" is decided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reachability {
    /// Any path of live links, relays included.
    #[default]
    Path,
    /// Only the direct link counts.
    Direct,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionSchedule {
    node_count: usize,
    outages: Vec<LinkOutage>,
}

impl PartitionSchedule {
    /// A schedule with no outages.
    pub fn healthy(node_count: usize) -> Self {
        PartitionSchedule {
            node_count,
            outages: Vec::new(),
        }
    }

    pub fn new(node_count: usize, outages: Vec<LinkOutage>) -> Result<Self, PartitionError> {
        let mut schedule = Self::healthy(node_count);
        for outage in outages {
            schedule.add(outage)?;
        }
        Ok(schedule)
    }

    /// Cuts every link between `side` and the remaining nodes over `[start, end)`.
    pub fn bipartition(
        node_count: usize,
        side: &[NodeId],
        start: Tick,
        end: Tick,
    ) -> Result<Self, PartitionError> {
        let mut schedule = Self::healthy(node_count);
        schedule.isolate_group(side, start, end)?;
        Ok(schedule)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn outages(&self) -> &[LinkOutage] {
        &self.outages
    }

    /// Adds an outage. Overlapping outages on one link combine as a union.
    pub fn add(&mut self, outage: LinkOutage) -> Result<(), PartitionError> {
        self.check_pair(outage.a, outage.b)?;
        if outage.start >= outage.end {
            return Err(PartitionError::EmptyInterval {
                a: outage.a,
                b: outage.b,
                start: outage.start,
                end: outage.end,
            });
        }
        self.outages.push(outage);
        Ok(())
    }

    /// A node crash: all of `node`'s links go down over `[start, end)`.
    pub fn crash(&mut self, node: NodeId, start: Tick, end: Tick) -> Result<(), PartitionError> {
        self.isolate_group(&[node], start, end)
    }

    fn isolate_group(
        &mut self,
        side: &[NodeId],
        start: Tick,
        end: Tick,
    ) -> Result<(), PartitionError> {
        for &inside in side {
            self.check_node(inside)?;
            for other in 0..self.node_count as u32 {
                let other = NodeId(other);
                if !side.contains(&other) {
                    self.add(LinkOutage::new(inside, other, start, end))?;
                }
            }
        }
        Ok(())
    }

    /// Whether the direct link `{a, b}` is live at `t`.
    pub fn link_up(&self, t: Tick, a: NodeId, b: NodeId) -> Result<bool, PartitionError> {
        self.check_pair(a, b)?;
        Ok(self.direct(t, a, b))
    }

    /// Whether `a` and `b` are joined by a path of live links at `t`.
    pub fn reachable(&self, t: Tick, a: NodeId, b: NodeId) -> Result<bool, PartitionError> {
        self.check_pair(a, b)?;
        Ok(self.bfs(t, a, b))
    }

    pub fn can_communicate(
        &self,
        mode: Reachability,
        t: Tick,
        a: NodeId,
        b: NodeId,
    ) -> Result<bool, PartitionError> {
        match mode {
            Reachability::Path => self.reachable(t, a, b),
            Reachability::Direct => self.link_up(t, a, b),
        }
    }

    /// The longest run of consecutive ticks in `[0, horizon)` during which
    /// some ordered node pair cannot communicate (path mode).
    pub fn compute_tp(&self, horizon: Tick) -> Tick {
        self.compute_tp_with(Reachability::Path, horizon)
    }

    /// `compute_tp` under either reachability mode.
    ///
    /// Connectivity only changes at outage boundaries, so the horizon is split
    /// into segments with a constant live-link set. Each segment's components
    /// are found once with union-find and each pair's disconnection run is
    /// carried across adjacent segments.
    pub fn compute_tp_with(&self, mode: Reachability, horizon: Tick) -> Tick {
        let n = self.node_count;
        if n < 2 || self.outages.is_empty() {
            return Tick::ZERO;
        }
        let mut cuts: Vec<Tick> = vec![Tick::ZERO, horizon];
        for o in &self.outages {
            cuts.extend([o.start.min(horizon), o.end.min(horizon)]);
        }
        cuts.sort_unstable();
        cuts.dedup();

        let pairs = n * (n - 1) / 2;
        let mut run = vec![0u64; pairs];
        let mut best = 0u64;
        for window in cuts.windows(2) {
            let (from, to) = (window[0], window[1]);
            if from >= to {
                continue;
            }
            let len = (to - from).get();
            let connected = self.segment_connectivity(mode, from);
            let mut idx = 0;
            for a in 0..n {
                for b in (a + 1)..n {
                    if connected(a, b) {
                        run[idx] = 0;
                    } else {
                        run[idx] += len;
                        best = best.max(run[idx]);
                    }
                    idx += 1;
                }
            }
        }
        Tick(best)
    }

    fn segment_connectivity(
        &self,
        mode: Reachability,
        t: Tick,
    ) -> Box<dyn Fn(usize, usize) -> bool + '_> {
        match mode {
            Reachability::Direct => {
                Box::new(move |a, b| self.direct(t, NodeId(a as u32), NodeId(b as u32)))
            }
            Reachability::Path => {
                let mut parent: Vec<usize> = (0..self.node_count).collect();
                for a in 0..self.node_count {
                    for b in (a + 1)..self.node_count {
                        if self.direct(t, NodeId(a as u32), NodeId(b as u32)) {
                            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                            if ra != rb {
                                parent[ra.max(rb)] = ra.min(rb);
                            }
                        }
                    }
                }
                let roots: Vec<usize> =
                    (0..self.node_count).map(|x| find(&mut parent, x)).collect();
                Box::new(move |a, b| roots[a] == roots[b])
            }
        }
    }

    fn direct(&self, t: Tick, a: NodeId, b: NodeId) -> bool {
        !self.outages.iter().any(|o| o.joins(a, b) && o.covers(t))
    }

    fn bfs(&self, t: Tick, from: NodeId, to: NodeId) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([from]);
        seen[from.index()] = true;
        while let Some(cur) = queue.pop_front() {
            if cur == to {
                return true;
            }
            for next in 0..self.node_count as u32 {
                let next = NodeId(next);
                if !seen[next.index()] && next != cur && self.direct(t, cur, next) {
                    seen[next.index()] = true;
                    queue.push_back(next);
                }
            }
        }
        false
    }

    fn check_node(&self, node: NodeId) -> Result<(), PartitionError> {
        if node.index() >= self.node_count {
            return Err(PartitionError::UnknownNode {
                node,
                node_count: self.node_count,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: NodeId, b: NodeId) -> Result<(), PartitionError> {
        if a == b {
            return Err(PartitionError::SelfLink(a));
        }
        self.check_node(a)?;
        self.check_node(b)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}
