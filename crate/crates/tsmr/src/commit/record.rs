use super::msg::PromiseBundle;
use crate::core::{
    Ballot, Command, FastQuorumMap, PartitionId, Phase, ProcessId, Timestamp,
};
use std::collections::{BTreeMap, BTreeSet};

/// Collects MProposeAck replies at the coordinator. Fires once all fast
/// quorum members answered.
#[derive(Debug, Clone, Default)]
pub struct ProposeTracker {
    pub expected: Vec<ProcessId>,
    pub proposals: BTreeMap<ProcessId, Timestamp>,
    pub bundles: Vec<PromiseBundle>,
    pub done: bool,
}

impl ProposeTracker {
    pub fn new(expected: Vec<ProcessId>) -> Self {
        Self { expected, ..Self::default() }
    }

    pub fn complete(&self) -> bool {
        !self.done && self.proposals.len() == self.expected.len()
    }

    /// Highest proposal and how many members proposed it.
    pub fn max_and_count(&self) -> (Timestamp, usize) {
        let max = self.proposals.values().copied().max().unwrap_or(0);
        let count = self.proposals.values().filter(|&&t| t == max).count();
        (max, count)
    }
}

/// Single-ballot consensus attempt lead by this process (initial coordinator
/// on the slow path, or a recoverer). Commits once `f + 1` processes accept.
#[derive(Debug, Clone)]
pub struct ConsensusTracker {
    pub value: Timestamp,
    pub ballot: Ballot,
    pub acks: BTreeSet<ProcessId>,
    pub committed: bool,
}

/// Collects MRecAck replies for one recovery ballot.
#[derive(Debug, Clone)]
pub struct RecTracker {
    pub ballot: Ballot,
    pub acks: BTreeMap<ProcessId, RecAckInfo>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct RecAckInfo {
    pub ts: Timestamp,
    pub phase: Phase,
    pub abal: Ballot,
}

/// Everything a process knows about one command identifier.
#[derive(Debug, Clone)]
pub struct CommandRecord {
    pub cmd: Option<Command>,
    pub quorums: Option<FastQuorumMap>,
    /// Timestamp proposal while pending, consensus value once accepted,
    /// final (aggregated) timestamp once committed.
    pub ts: Timestamp,
    pub phase: Phase,
    pub bal: Ballot,
    pub abal: Ballot,
    pub propose: Option<ProposeTracker>,
    pub consensus: Option<ConsensusTracker>,
    pub rec: Option<RecTracker>,
    /// Per-partition commit timestamps gathered so far.
    pub part_commits: BTreeMap<PartitionId, Timestamp>,
    /// Partitions from which an MStable witness was received.
    pub stable_witnesses: BTreeSet<PartitionId>,
    pub mstable_sent: bool,
    pub mstable_sent_at: u64,
    /// Simulated time of the last state change, drives resend/recovery.
    pub last_activity: u64,
}

impl CommandRecord {
    pub fn new(now: u64) -> Self {
        Self {
            cmd: None,
            quorums: None,
            ts: 0,
            phase: Phase::Start,
            bal: 0,
            abal: 0,
            propose: None,
            consensus: None,
            rec: None,
            part_commits: BTreeMap::new(),
            stable_witnesses: BTreeSet::new(),
            mstable_sent: false,
            mstable_sent_at: 0,
            last_activity: now,
        }
    }

    /// Moves to `next`, checking the transition is an edge of the phase
    /// diagram. Protocol handlers only ever request legal transitions.
    pub fn transition(&mut self, next: Phase, now: u64) {
        assert!(
            self.phase.can_transition_to(next),
            "illegal phase transition {} -> {}",
            self.phase,
            next
        );
        debug_assert!(self.cmd.is_some(), "leaving start without a payload");
        self.phase = next;
        self.last_activity = now;
    }

    pub fn touch(&mut self, now: u64) {
        self.last_activity = now;
    }

    /// The command's accessed partitions; only valid once the payload is
    /// known (any phase other than start).
    pub fn accessed(&self) -> impl Iterator<Item = PartitionId> + '_ {
        self.cmd
            .as_ref()
            .expect("payload known when not in start")
            .partitions()
    }
}
