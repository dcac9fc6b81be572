use crate::core::{PartitionId, ProcessId, RttMatrix, SiteId};
use std::collections::BTreeSet;

/// Failure-detector snapshot handed to the handlers that need one: who is
/// currently suspected, from which the per-partition leader estimate and the
/// closest-replica covering are derived.
///
/// In the simulator suspicion tracks real crashes after a detection delay;
/// the protocol only relies on it for liveness, never safety.
#[derive(Debug, Clone, Default)]
pub struct FdView {
    suspected: BTreeSet<ProcessId>,
}

impl FdView {
    pub fn all_alive() -> Self {
        Self::default()
    }

    pub fn new(suspected: BTreeSet<ProcessId>) -> Self {
        Self { suspected }
    }

    pub fn suspect(&mut self, j: ProcessId) {
        self.suspected.insert(j);
    }

    pub fn alive(&self, j: ProcessId) -> bool {
        !self.suspected.contains(&j)
    }

    /// Leader estimate for a partition: the lowest-ranked replica not
    /// currently suspected.
    pub fn leader_of(&self, p: PartitionId, r: usize) -> Option<ProcessId> {
        (0..r as SiteId)
            .map(|site| ProcessId::new(p, site))
            .find(|&j| self.alive(j))
    }

    /// Covering estimate: the replica of `p` closest to `from_site` among
    /// those believed alive, ties broken by process order.
    pub fn closest_alive(
        &self,
        p: PartitionId,
        from_site: SiteId,
        rtt: &RttMatrix,
        r: usize,
    ) -> Option<ProcessId> {
        (0..r as SiteId)
            .map(|site| ProcessId::new(p, site))
            .filter(|&j| self.alive(j))
            .min_by_key(|j| (rtt.rtt_ms(from_site, j.site), *j))
    }
}
