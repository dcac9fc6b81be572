use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// Index of a site (region / data center) in the topology.
pub type SiteId = u16;

/// Index of a state partition. Every key belongs to exactly one partition.
pub type PartitionId = u16;

/// Logical timestamp. `0` means "unassigned"; committed timestamps are >= 1.
pub type Timestamp = u64;

/// Consensus ballot number. `0` means "never participated".
pub type Ballot = u64;

/// A process replicates exactly one partition and lives at one site.
///
/// The total order is lexicographic on `(partition, site)`; it is what breaks
/// ties everywhere a deterministic choice among processes is needed.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ProcessId {
    pub partition: PartitionId,
    pub site: SiteId,
}

impl ProcessId {
    pub const fn new(partition: PartitionId, site: SiteId) -> Self {
        Self { partition, site }
    }

    /// Rank of this process within its partition, in `1..=r`.
    /// Ballot `rank` is reserved for this process as initial coordinator.
    pub fn rank(&self) -> u64 {
        self.site as u64 + 1
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}p{}", self.site, self.partition)
    }
}

/// Globally unique command identifier: submitting process plus a
/// per-submitter sequence number. Never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct CommandId {
    pub submitter: ProcessId,
    pub seq: u64,
}

impl fmt::Display for CommandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.submitter, self.seq)
    }
}

/// Total order on command identifiers, used to break execution ties between
/// equal timestamps. Lexicographic on `(submitter, seq)`.
pub fn id_order(a: &CommandId, b: &CommandId) -> Ordering {
    a.cmp(b)
}

/// Monotone identifier allocator for one submitting process.
#[derive(Debug, Clone)]
pub struct IdSource {
    submitter: ProcessId,
    next: u64,
}

impl IdSource {
    pub fn new(submitter: ProcessId) -> Self {
        Self { submitter, next: 0 }
    }

    /// Returns a fresh identifier; ids are strictly increasing per submitter.
    pub fn next_id(&mut self) -> CommandId {
        let id = CommandId {
            submitter: self.submitter,
            seq: self.next,
        };
        self.next += 1;
        id
    }
}
