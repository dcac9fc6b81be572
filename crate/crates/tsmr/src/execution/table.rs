use crate::core::{CommandId, ProcessId, Timestamp};
use std::collections::{BTreeMap, BTreeSet};

/// Promises known from one peer: a contiguous prefix `1..=contiguous` plus
/// sparse timestamps beyond it. Promises arrive nearly in order, so the
/// sparse set stays small.
#[derive(Debug, Clone, Default)]
struct PeerPromises {
    contiguous: Timestamp,
    sparse: BTreeSet<Timestamp>,
}

impl PeerPromises {
    fn insert(&mut self, ts: Timestamp) {
        if ts <= self.contiguous {
            return;
        }
        if ts == self.contiguous + 1 {
            self.contiguous = ts;
            while self.sparse.remove(&(self.contiguous + 1)) {
                self.contiguous += 1;
            }
        } else {
            self.sparse.insert(ts);
        }
    }

    fn contains(&self, ts: Timestamp) -> bool {
        ts <= self.contiguous || self.sparse.contains(&ts)
    }
}

/// Per-process view of the promises issued across the partition.
///
/// Detached promises become admissible on receipt. An attached promise is
/// buffered under its command id and only admitted once that command is
/// locally committed or executed; until then it is a hole that caps the
/// sender's highest contiguous promise.
#[derive(Debug, Clone, Default)]
pub struct PromiseTable {
    peers: BTreeMap<ProcessId, PeerPromises>,
    buffered: BTreeMap<CommandId, BTreeSet<(ProcessId, Timestamp)>>,
}

impl PromiseTable {
    /// A table tracking exactly the replicas of one partition.
    pub fn new(peers: impl IntoIterator<Item = ProcessId>) -> Self {
        Self {
            peers: peers
                .into_iter()
                .map(|j| (j, PeerPromises::default()))
                .collect(),
            buffered: BTreeMap::new(),
        }
    }

    /// Admits a promise by `peer` immediately (detached, or attached to an
    /// already-committed command).
    pub fn insert_admissible(&mut self, peer: ProcessId, ts: Timestamp) {
        if let Some(entry) = self.peers.get_mut(&peer) {
            entry.insert(ts);
        }
    }

    pub fn insert_admissible_range(&mut self, peer: ProcessId, from: Timestamp, to: Timestamp) {
        for ts in from..=to {
            self.insert_admissible(peer, ts);
        }
    }

    /// Buffers an attached promise until its command commits locally.
    pub fn buffer_attached(&mut self, id: CommandId, peer: ProcessId, ts: Timestamp) {
        self.buffered.entry(id).or_default().insert((peer, ts));
    }

    /// Admits every buffered promise attached to `id`; called when the
    /// command commits locally.
    pub fn admit(&mut self, id: CommandId) {
        if let Some(set) = self.buffered.remove(&id) {
            for (peer, ts) in set {
                self.insert_admissible(peer, ts);
            }
        }
    }

    /// Command ids with buffered attached promises, i.e. ids some peer has
    /// proposed for but which are not locally committed yet.
    pub fn buffered_ids(&self) -> impl Iterator<Item = CommandId> + '_ {
        self.buffered.keys().copied()
    }

    pub fn buffered_is_empty(&self) -> bool {
        self.buffered.is_empty()
    }

    pub fn contains(&self, peer: ProcessId, ts: Timestamp) -> bool {
        self.peers.get(&peer).is_some_and(|e| e.contains(ts))
    }

    /// Highest `c` such that all of `peer`'s promises `1..=c` are admissible.
    pub fn highest_contiguous(&self, peer: ProcessId) -> Timestamp {
        self.peers.get(&peer).map_or(0, |e| e.contiguous)
    }

    /// The stable timestamp: every command with a timestamp at or below it is
    /// locally committed. Ascending sort of the per-peer highest contiguous
    /// promises, element at index `floor(r/2)` — the smallest value among the
    /// best majority.
    pub fn stable_timestamp(&self) -> Timestamp {
        let mut hcv: Vec<Timestamp> = self.peers.values().map(|e| e.contiguous).collect();
        hcv.sort_unstable();
        hcv[hcv.len() / 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(site: u16) -> ProcessId {
        ProcessId::new(0, site)
    }

    fn table() -> PromiseTable {
        PromiseTable::new([p(0), p(1), p(2)])
    }

    #[test]
    fn hcv_requires_a_contiguous_prefix() {
        let mut t = table();
        t.insert_admissible(p(0), 2);
        assert_eq!(t.highest_contiguous(p(0)), 0);
        let mut t = table();
        for ts in 1..=3 {
            t.insert_admissible(p(1), ts);
        }
        assert_eq!(t.highest_contiguous(p(1)), 3);
        let mut t = table();
        t.insert_admissible(p(2), 1);
        t.insert_admissible(p(2), 2);
        assert_eq!(t.highest_contiguous(p(2)), 2);
    }

    #[test]
    fn out_of_order_inserts_fill_holes() {
        let mut t = table();
        t.insert_admissible(p(0), 3);
        t.insert_admissible(p(0), 2);
        assert_eq!(t.highest_contiguous(p(0)), 0);
        t.insert_admissible(p(0), 1);
        assert_eq!(t.highest_contiguous(p(0)), 3);
    }

    #[test]
    fn buffered_attached_promises_are_holes_until_admitted() {
        let mut t = table();
        let id = CommandId { submitter: p(1), seq: 0 };
        t.insert_admissible(p(1), 1);
        t.buffer_attached(id, p(1), 2);
        t.insert_admissible(p(1), 3);
        assert_eq!(t.highest_contiguous(p(1)), 1);
        t.admit(id);
        assert_eq!(t.highest_contiguous(p(1)), 3);
    }

    #[test]
    fn stable_timestamp_takes_majority_floor() {
        // hcv {0, 3, 2} -> sorted [0, 2, 3] -> index 1 -> 2
        let mut t = table();
        for ts in 1..=3 {
            t.insert_admissible(p(1), ts);
        }
        for ts in 1..=2 {
            t.insert_admissible(p(2), ts);
        }
        t.insert_admissible(p(0), 2); // hole at 1
        assert_eq!(t.stable_timestamp(), 2);
    }
}
