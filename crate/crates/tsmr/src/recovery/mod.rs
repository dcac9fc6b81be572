//! Coordinator takeover after a suspected failure: ballot arithmetic, the
//! recovery round, and the periodic liveness machinery (payload resends,
//! commit requests, ballot nacks).

mod fd;
mod handlers;

pub use fd::FdView;

use crate::core::Ballot;

/// Owner rank of a ballot: `b - r * floor((b - 1) / r)`, in `1..=r`. Ballot
/// `i` is reserved for the initial coordinator of rank `i`; higher ballots
/// rotate ownership round-robin.
pub fn bal_leader(ballot: Ballot, r: usize) -> u64 {
    debug_assert!(ballot >= 1, "ballot 0 has no owner");
    let r = r as u64;
    ballot - r * ((ballot - 1) / r)
}

/// Next ballot owned by rank `i` above `bal`: `i + r * (floor((bal - 1) / r) + 1)`.
/// The floor is toward negative infinity, so `bal = 0` yields the reserved
/// ballot `i` itself.
pub fn recover_ballot(rank: u64, bal: Ballot, r: usize) -> Ballot {
    let r = r as i64;
    let step = (bal as i64 - 1).div_euclid(r) + 1;
    (rank as i64 + r * step) as Ballot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bal_leader_examples() {
        assert_eq!(bal_leader(7, 5), 2); // 7 - 5 * floor(6/5)
        assert_eq!(bal_leader(3, 5), 3); // b <= r maps to itself
        assert_eq!(bal_leader(3, 3), 3); // boundary: floor(2/3) = 0
    }

    #[test]
    fn recover_ballot_examples() {
        assert_eq!(recover_ballot(2, 3, 5), 7); // 2 + 5 * (floor(2/5) + 1)
        assert_eq!(recover_ballot(2, 0, 5), 2); // floor(-1/5) = -1
        assert_eq!(recover_ballot(2, 7, 5), 12); // 2 + 5 * (1 + 1)
    }

    #[test]
    fn recover_ballot_owned_and_above() {
        // exhaustive: the produced ballot is owned by the caller and beats
        // both the joined ballot and every reserved coordinator ballot
        for r in [3usize, 5, 7] {
            for rank in 1..=r as u64 {
                for bal in 0..=1000u64 {
                    let b = recover_ballot(rank, bal, r);
                    assert_eq!(bal_leader(b, r), rank, "owner of {b} with r={r}");
                    if bal >= 1 {
                        assert!(b > bal.max(r as u64), "b={b} bal={bal} r={r}");
                    } else {
                        assert_eq!(b, rank);
                    }
                }
            }
        }
    }
}
