use crate::core::{CommandId, Timestamp};
use serde::{Deserialize, Serialize};

/// One contiguous batch of promises produced by a single clock bump.
///
/// `fun_ts` yields an optional detached range plus one attached promise;
/// `fun_bump` yields only a detached range.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PromiseDelta {
    /// Inclusive range of detached timestamps, if the bump skipped any.
    pub detached: Option<(Timestamp, Timestamp)>,
    pub attached: Option<(CommandId, Timestamp)>,
}

impl PromiseDelta {
    pub fn is_empty(&self) -> bool {
        self.detached.is_none() && self.attached.is_none()
    }
}

/// Entry of the local promise history, kept in emission order so deltas can
/// be cut per peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OwnPromise {
    /// Detached promises for the inclusive timestamp range.
    Detached { from: Timestamp, to: Timestamp },
    Attached { id: CommandId, ts: Timestamp },
}

/// The per-process logical clock together with the full history of promises
/// it has issued. Every timestamp in `1..=clock` is covered by exactly one
/// history entry.
#[derive(Debug, Clone, Default)]
pub struct PartitionClock {
    clock: Timestamp,
    history: Vec<OwnPromise>,
}

impl PartitionClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> Timestamp {
        self.clock
    }

    pub fn history(&self) -> &[OwnPromise] {
        &self.history
    }

    /// Timestamp proposal for `id`: `t = max(m, clock + 1)`. Burns the skipped
    /// range `clock+1 ..= t-1` as detached promises, attaches `t` to `id` and
    /// bumps the clock to `t`.
    pub fn fun_ts(&mut self, id: CommandId, m: Timestamp) -> (Timestamp, PromiseDelta) {
        let t = m.max(self.clock + 1);
        let mut delta = PromiseDelta::default();
        if self.clock < t - 1 {
            let range = (self.clock + 1, t - 1);
            self.history.push(OwnPromise::Detached { from: range.0, to: range.1 });
            delta.detached = Some(range);
        }
        self.history.push(OwnPromise::Attached { id, ts: t });
        delta.attached = Some((id, t));
        self.clock = t;
        (t, delta)
    }

    /// Bumps the clock to `max(t, clock)`, burning the whole skipped range
    /// `clock+1 ..= t` as detached promises. No attached promise.
    pub fn fun_bump(&mut self, t: Timestamp) -> PromiseDelta {
        let mut delta = PromiseDelta::default();
        if t > self.clock {
            let range = (self.clock + 1, t);
            self.history.push(OwnPromise::Detached { from: range.0, to: range.1 });
            delta.detached = Some(range);
            self.clock = t;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ProcessId;

    fn cid(seq: u64) -> CommandId {
        CommandId { submitter: ProcessId::new(0, 0), seq }
    }

    #[test]
    fn fun_ts_without_gap_attaches_only() {
        // clock 6, proposal 6 -> 7, no detached
        let mut clk = PartitionClock::new();
        clk.fun_bump(6);
        let (t, delta) = clk.fun_ts(cid(0), 6);
        assert_eq!(t, 7);
        assert_eq!(delta.detached, None);
        assert_eq!(delta.attached, Some((cid(0), 7)));
        assert_eq!(clk.value(), 7);
    }

    #[test]
    fn fun_ts_burns_skipped_range() {
        // clock 1, proposal 6 -> 6 with detached {2, 3, 4, 5}
        let mut clk = PartitionClock::new();
        clk.fun_bump(1);
        let (t, delta) = clk.fun_ts(cid(0), 6);
        assert_eq!(t, 6);
        assert_eq!(delta.detached, Some((2, 5)));
        assert_eq!(clk.value(), 6);
    }

    #[test]
    fn fun_ts_above_proposal() {
        // clock 10, proposal 6 -> 11, no detached
        let mut clk = PartitionClock::new();
        clk.fun_bump(10);
        let (t, delta) = clk.fun_ts(cid(0), 6);
        assert_eq!(t, 11);
        assert_eq!(delta.detached, None);
    }

    #[test]
    fn fun_bump_examples() {
        let mut clk = PartitionClock::new();
        clk.fun_bump(6);
        // 6 -> 10 burns {7, 8, 9, 10}
        let delta = clk.fun_bump(10);
        assert_eq!(delta.detached, Some((7, 10)));
        assert_eq!(clk.value(), 10);
        // bumping below the clock is a no-op
        let delta = clk.fun_bump(6);
        assert!(delta.is_empty());
        assert_eq!(clk.value(), 10);
        // zero stays zero
        let mut clk = PartitionClock::new();
        let delta = clk.fun_bump(0);
        assert!(delta.is_empty());
        assert_eq!(clk.value(), 0);
    }

    #[test]
    fn history_covers_exactly_one_to_clock() {
        // interleave bumps and proposals, then check full coverage
        let mut clk = PartitionClock::new();
        clk.fun_ts(cid(0), 0);
        clk.fun_bump(4);
        clk.fun_ts(cid(1), 9);
        clk.fun_bump(3);
        let mut seen = vec![false; clk.value() as usize + 1];
        for entry in clk.history() {
            let (from, to) = match *entry {
                OwnPromise::Detached { from, to } => (from, to),
                OwnPromise::Attached { ts, .. } => (ts, ts),
            };
            for u in from..=to {
                assert!(!seen[u as usize], "duplicate promise for {u}");
                seen[u as usize] = true;
            }
        }
        assert!(seen[1..].iter().all(|&s| s), "hole in promise coverage");
    }
}
