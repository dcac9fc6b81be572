use crate::core::{
    Ballot, Command, CommandId, FastQuorumMap, PartitionId, Phase, ProcessId, Timestamp,
};
use serde::{Deserialize, Serialize};

/// Promises from one process, shipped either in a periodic MPromises or
/// piggybacked on MProposeAck/MCommit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromiseBundle {
    pub from: ProcessId,
    /// Inclusive detached ranges.
    pub detached: Vec<(Timestamp, Timestamp)>,
    pub attached: Vec<(CommandId, Timestamp)>,
}

impl PromiseBundle {
    pub fn empty(from: ProcessId) -> Self {
        Self { from, detached: Vec::new(), attached: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.detached.is_empty() && self.attached.is_empty()
    }
}

/// Protocol message vocabulary. Every message is addressed to an explicit
/// destination set by the sending handler.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum Message {
    MSubmit {
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
    },
    MPropose {
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
        ts: Timestamp,
    },
    MPayload {
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
    },
    MProposeAck {
        id: CommandId,
        ts: Timestamp,
        promises: Option<PromiseBundle>,
    },
    /// Per-partition commit. `relay: false` is the coordinator/recoverer
    /// decision for `partition`; `relay: true` answers an MCommitRequest and
    /// carries the final (aggregated) timestamp.
    MCommit {
        id: CommandId,
        ts: Timestamp,
        partition: PartitionId,
        relay: bool,
        promises: Vec<PromiseBundle>,
    },
    MConsensus {
        id: CommandId,
        ts: Timestamp,
        ballot: Ballot,
    },
    MConsensusAck {
        id: CommandId,
        ballot: Ballot,
    },
    MBump {
        id: CommandId,
        ts: Timestamp,
    },
    MPromises {
        bundle: PromiseBundle,
    },
    MStable {
        id: CommandId,
    },
    MRec {
        id: CommandId,
        ballot: Ballot,
    },
    MRecAck {
        id: CommandId,
        ts: Timestamp,
        phase: Phase,
        abal: Ballot,
        ballot: Ballot,
    },
    MRecNAck {
        id: CommandId,
        ballot: Ballot,
    },
    MCommitRequest {
        id: CommandId,
    },
}

impl Message {
    pub fn name(&self) -> &'static str {
        match self {
            Message::MSubmit { .. } => "MSubmit",
            Message::MPropose { .. } => "MPropose",
            Message::MPayload { .. } => "MPayload",
            Message::MProposeAck { .. } => "MProposeAck",
            Message::MCommit { .. } => "MCommit",
            Message::MConsensus { .. } => "MConsensus",
            Message::MConsensusAck { .. } => "MConsensusAck",
            Message::MBump { .. } => "MBump",
            Message::MPromises { .. } => "MPromises",
            Message::MStable { .. } => "MStable",
            Message::MRec { .. } => "MRec",
            Message::MRecAck { .. } => "MRecAck",
            Message::MRecNAck { .. } => "MRecNAck",
            Message::MCommitRequest { .. } => "MCommitRequest",
        }
    }

    /// The command this message is about, when there is one.
    pub fn command_id(&self) -> Option<CommandId> {
        match self {
            Message::MSubmit { id, .. }
            | Message::MPropose { id, .. }
            | Message::MPayload { id, .. }
            | Message::MProposeAck { id, .. }
            | Message::MCommit { id, .. }
            | Message::MConsensus { id, .. }
            | Message::MConsensusAck { id, .. }
            | Message::MBump { id, .. }
            | Message::MStable { id, .. }
            | Message::MRec { id, .. }
            | Message::MRecAck { id, .. }
            | Message::MRecNAck { id, .. }
            | Message::MCommitRequest { id, .. } => Some(*id),
            Message::MPromises { .. } => None,
        }
    }
}
