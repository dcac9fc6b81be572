use super::id::{CommandId, PartitionId, ProcessId};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Key of the replicated keyed state machine.
pub type Key = u64;

/// An application command: which keys it touches, grouped by partition, plus
/// an opaque payload interpreted only by the state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub id: CommandId,
    pub accesses: BTreeMap<PartitionId, BTreeSet<Key>>,
    pub payload: Vec<u8>,
}

impl Command {
    /// Builds a command. `accesses` must be non-empty and the submitter must
    /// replicate one of the accessed partitions.
    pub fn new(
        id: CommandId,
        accesses: BTreeMap<PartitionId, BTreeSet<Key>>,
        payload: Vec<u8>,
    ) -> Result<Self, CommandError> {
        if accesses.is_empty() {
            return Err(CommandError::NoAccesses);
        }
        if !accesses.contains_key(&id.submitter.partition) {
            return Err(CommandError::SubmitterNotAReplica(id.submitter));
        }
        Ok(Self { id, accesses, payload })
    }

    /// Partitions accessed by this command, in ascending order.
    pub fn partitions(&self) -> impl Iterator<Item = PartitionId> + '_ {
        self.accesses.keys().copied()
    }

    pub fn partition_count(&self) -> usize {
        self.accesses.len()
    }

    pub fn accesses_partition(&self, p: PartitionId) -> bool {
        self.accesses.contains_key(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommandError {
    #[error("command accesses no partition")]
    NoAccesses,
    #[error("submitter {0} does not replicate any accessed partition")]
    SubmitterNotAReplica(ProcessId),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ProcessId;

    fn id_at(partition: PartitionId) -> CommandId {
        CommandId { submitter: ProcessId::new(partition, 0), seq: 0 }
    }

    #[test]
    fn rejects_empty_accesses() {
        let err = Command::new(id_at(0), BTreeMap::new(), vec![]);
        assert_eq!(err.unwrap_err(), CommandError::NoAccesses);
    }

    #[test]
    fn rejects_submitter_outside_accessed_partitions() {
        let mut accesses = BTreeMap::new();
        accesses.insert(1, BTreeSet::from([7]));
        let err = Command::new(id_at(0), accesses, vec![]);
        assert!(matches!(err, Err(CommandError::SubmitterNotAReplica(_))));
    }

    #[test]
    fn partitions_are_sorted() {
        let mut accesses = BTreeMap::new();
        accesses.insert(2, BTreeSet::from([1]));
        accesses.insert(0, BTreeSet::from([2]));
        let cmd = Command::new(id_at(0), accesses, vec![]).unwrap();
        assert_eq!(cmd.partitions().collect::<Vec<_>>(), vec![0, 2]);
    }
}
