use serde::{Deserialize, Serialize};
use std::fmt;

/// Journey of a command through a process. `Start` is implicit: a process in
/// `Start` holds no record for the id.
///
/// Allowed transitions:
/// `Start -> {Payload, Propose}`, `Payload -> RecoverR`,
/// `Propose -> RecoverP`, any pending phase `-> Commit`, `Commit -> Execute`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Start,
    Payload,
    Propose,
    RecoverR,
    RecoverP,
    Commit,
    Execute,
}

impl Phase {
    /// Pending = payload | propose | recover-r | recover-p.
    pub fn is_pending(self) -> bool {
        matches!(
            self,
            Phase::Payload | Phase::Propose | Phase::RecoverR | Phase::RecoverP
        )
    }

    pub fn is_committed_or_executed(self) -> bool {
        matches!(self, Phase::Commit | Phase::Execute)
    }

    /// Whether `self -> next` is an edge of the phase diagram.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Start, Payload)
                | (Start, Propose)
                | (Payload, RecoverR)
                | (Propose, RecoverP)
                | (Payload, Commit)
                | (Propose, Commit)
                | (RecoverR, Commit)
                | (RecoverP, Commit)
                | (Commit, Execute)
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::Start => "start",
            Phase::Payload => "payload",
            Phase::Propose => "propose",
            Phase::RecoverR => "recover-r",
            Phase::RecoverP => "recover-p",
            Phase::Commit => "commit",
            Phase::Execute => "execute",
        };
        f.write_str(name)
    }
}
