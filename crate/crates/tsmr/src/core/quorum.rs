use super::id::{PartitionId, ProcessId, SiteId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Symmetric round-trip times between sites, in milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RttMatrix {
    rtt: Vec<Vec<u32>>,
}

impl RttMatrix {
    pub fn new(rtt: Vec<Vec<u32>>) -> Result<Self, QuorumError> {
        let n = rtt.len();
        for (i, row) in rtt.iter().enumerate() {
            if row.len() != n {
                return Err(QuorumError::NotSquare);
            }
            if row[i] != 0 {
                return Err(QuorumError::NonZeroDiagonal { site: i as SiteId });
            }
            for (j, &v) in row.iter().enumerate() {
                if rtt[j][i] != v {
                    return Err(QuorumError::Asymmetric { a: i as SiteId, b: j as SiteId });
                }
            }
        }
        Ok(Self { rtt })
    }

    pub fn sites(&self) -> usize {
        self.rtt.len()
    }

    pub fn rtt_ms(&self, a: SiteId, b: SiteId) -> u32 {
        self.rtt[a as usize][b as usize]
    }

    /// One-way delay in microseconds; messages take half a ping.
    pub fn one_way_us(&self, a: SiteId, b: SiteId) -> u64 {
        self.rtt_ms(a, b) as u64 * 500
    }
}

/// Fast quorum chosen per accessed partition. The head of each list is that
/// partition's coordinator for the command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastQuorumMap {
    quorums: BTreeMap<PartitionId, Vec<ProcessId>>,
}

impl FastQuorumMap {
    /// Builds a quorum map from explicit member lists (head = coordinator).
    /// Lists must be non-empty and replicate the keyed partition.
    pub fn from_parts(quorums: BTreeMap<PartitionId, Vec<ProcessId>>) -> Self {
        for (p, members) in &quorums {
            assert!(!members.is_empty(), "empty quorum for partition {p}");
            assert!(
                members.iter().all(|m| m.partition == *p),
                "quorum member outside partition {p}"
            );
        }
        Self { quorums }
    }

    pub fn coordinator(&self, p: PartitionId) -> Option<ProcessId> {
        self.quorums.get(&p).map(|q| q[0])
    }

    pub fn members(&self, p: PartitionId) -> Option<&[ProcessId]> {
        self.quorums.get(&p).map(|q| q.as_slice())
    }

    pub fn partitions(&self) -> impl Iterator<Item = PartitionId> + '_ {
        self.quorums.keys().copied()
    }

    pub fn coordinators(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.quorums.values().map(|q| q[0])
    }

    pub fn contains(&self, p: PartitionId, process: ProcessId) -> bool {
        self.quorums
            .get(&p)
            .is_some_and(|q| q.contains(&process))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuorumError {
    #[error("rtt matrix is not square")]
    NotSquare,
    #[error("rtt matrix has non-zero diagonal at site {site}")]
    NonZeroDiagonal { site: SiteId },
    #[error("rtt matrix is asymmetric between sites {a} and {b}")]
    Asymmetric { a: SiteId, b: SiteId },
    #[error("partition {partition} has {alive} live replicas, quorum needs {needed}")]
    InsufficientReplicas { partition: PartitionId, alive: usize, needed: usize },
}

/// Picks the fast quorum for each accessed partition.
///
/// The coordinator of partition `p` is the live replica of `p` with minimal
/// RTT to the submitter; the remaining `floor(r/2) + f - 1` members are the
/// live replicas closest to that coordinator. All ties break by process
/// order so that runs are reproducible.
pub fn fast_quorums(
    submitter: ProcessId,
    partitions: impl IntoIterator<Item = PartitionId>,
    rtt: &RttMatrix,
    quorum_size: usize,
    alive: impl Fn(ProcessId) -> bool,
) -> Result<FastQuorumMap, QuorumError> {
    let sites = rtt.sites() as SiteId;
    let mut quorums = BTreeMap::new();
    for p in partitions {
        let candidates: Vec<ProcessId> = (0..sites)
            .map(|site| ProcessId::new(p, site))
            .filter(|&j| alive(j))
            .collect();
        if candidates.len() < quorum_size {
            return Err(QuorumError::InsufficientReplicas {
                partition: p,
                alive: candidates.len(),
                needed: quorum_size,
            });
        }
        let coordinator = *candidates
            .iter()
            .min_by_key(|j| (rtt.rtt_ms(submitter.site, j.site), **j))
            .expect("candidates checked non-empty");

        let mut rest: Vec<ProcessId> = candidates
            .into_iter()
            .filter(|&j| j != coordinator)
            .collect();
        rest.sort_by_key(|j| (rtt.rtt_ms(coordinator.site, j.site), *j));
        rest.truncate(quorum_size - 1);

        let mut members = Vec::with_capacity(quorum_size);
        members.push(coordinator);
        members.extend(rest);
        quorums.insert(p, members);
    }
    Ok(FastQuorumMap { quorums })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Sites 0..5 with the wide-area ping table used throughout the fixtures:
    // 0 Ireland, 1 N. California, 2 Singapore, 3 Canada, 4 S. Paulo.
    pub(crate) fn wide_area() -> RttMatrix {
        RttMatrix::new(vec![
            vec![0, 141, 186, 72, 183],
            vec![141, 0, 181, 78, 190],
            vec![186, 181, 0, 221, 338],
            vec![72, 78, 221, 0, 123],
            vec![183, 190, 338, 123, 0],
        ])
        .unwrap()
    }

    #[test]
    fn coordinator_plus_two_closest_for_r5_f1() {
        // From Ireland, sorting its RTT row gives Canada (72) then
        // N. California (141); quorum size floor(5/2) + 1 = 3.
        let rtt = wide_area();
        let i = ProcessId::new(0, 0);
        let qs = fast_quorums(i, [0], &rtt, 3, |_| true).unwrap();
        assert_eq!(
            qs.members(0).unwrap(),
            &[ProcessId::new(0, 0), ProcessId::new(0, 3), ProcessId::new(0, 1)]
        );
        assert_eq!(qs.coordinator(0), Some(i));
    }

    #[test]
    fn r3_f1_takes_two_of_three() {
        let rtt = RttMatrix::new(vec![
            vec![0, 50, 100],
            vec![50, 0, 60],
            vec![100, 60, 0],
        ])
        .unwrap();
        let i = ProcessId::new(0, 0);
        // floor(3/2) + 1 = 2: coordinator plus its closest peer
        let qs = fast_quorums(i, [0], &rtt, 2, |_| true).unwrap();
        assert_eq!(qs.members(0).unwrap(), &[i, ProcessId::new(0, 1)]);
        // with quorum size 3 every replica joins, coordinator first
        let qs = fast_quorums(i, [0], &rtt, 3, |_| true).unwrap();
        assert_eq!(qs.members(0).unwrap().len(), 3);
        assert_eq!(qs.members(0).unwrap()[0], i);
    }

    #[test]
    fn remote_partition_gets_its_own_nearby_coordinator() {
        let rtt = wide_area();
        // submitter replicates partition 0 at Ireland; command also touches
        // partition 1, whose closest replica is the one co-located at
        // Ireland (rtt 0), and the closest after that Canada (72)
        let i = ProcessId::new(0, 0);
        let qs = fast_quorums(i, [0, 1], &rtt, 3, |_| true).unwrap();
        assert_eq!(qs.coordinator(0), Some(i));
        assert_eq!(qs.coordinator(1), Some(ProcessId::new(1, 0)));
        assert_eq!(qs.partitions().collect::<Vec<_>>(), vec![0, 1]);
        // with the co-located replica suspected, Canada takes over
        let colocated = ProcessId::new(1, 0);
        let qs = fast_quorums(i, [1], &rtt, 3, |j| j != colocated).unwrap();
        assert_eq!(qs.coordinator(1), Some(ProcessId::new(1, 3)));
    }

    #[test]
    fn crashed_replicas_are_skipped() {
        let rtt = wide_area();
        let i = ProcessId::new(0, 0);
        let canada = ProcessId::new(0, 3);
        let qs = fast_quorums(i, [0], &rtt, 3, |j| j != canada).unwrap();
        assert!(!qs.contains(0, canada));
        assert_eq!(qs.members(0).unwrap().len(), 3);
    }

    #[test]
    fn insufficient_replicas_is_an_error() {
        let rtt = wide_area();
        let i = ProcessId::new(0, 0);
        let err = fast_quorums(i, [0], &rtt, 5, |j| j.site < 4).unwrap_err();
        assert_eq!(
            err,
            QuorumError::InsufficientReplicas { partition: 0, alive: 4, needed: 5 }
        );
    }

    #[test]
    fn rtt_matrix_validation() {
        assert!(RttMatrix::new(vec![vec![0, 1], vec![1, 0, 2]]).is_err());
        assert!(RttMatrix::new(vec![vec![1]]).is_err());
        assert!(RttMatrix::new(vec![vec![0, 1], vec![2, 0]]).is_err());
    }
}
