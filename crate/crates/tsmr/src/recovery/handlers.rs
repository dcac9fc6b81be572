//! Recovery-side handlers of the process state machine.

use super::{bal_leader, recover_ballot, FdView};
use crate::commit::{
    ConsensusTracker, Effect, Message, Process, RecAckInfo, RecTracker, RecoveryEvent, SimTime,
};
use crate::core::{Ballot, CommandId, Phase, ProcessId, Timestamp};
use std::collections::BTreeSet;

impl Process {
    /// Takes over coordination of a pending command: picks the next ballot
    /// this process owns above the one it last joined and asks the partition
    /// for its state.
    pub fn recover(&mut self, id: CommandId, now: SimTime, fx: &mut Vec<Effect>) {
        let Some(record) = self.records.get_mut(&id) else { return };
        if !record.phase.is_pending() {
            return;
        }
        let ballot = recover_ballot(self.id.rank(), record.bal, self.config.r);
        record.rec = Some(RecTracker { ballot, acks: Default::default(), done: false });
        record.touch(now);
        log::debug!("{}: recovering {id} at ballot {ballot}", self.id);
        fx.push(Effect::Recovery { id, ballot, event: RecoveryEvent::Started });
        fx.push(Effect::Send {
            to: self.partition_peers(),
            msg: Message::MRec { id, ballot },
        });
    }

    pub(crate) fn handle_rec(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ballot: Ballot,
        now: SimTime,
        fx: &mut Vec<Effect>,
    ) {
        let record = self.record_mut(id, now);
        match record.phase {
            Phase::Start => {
                // no payload yet; retry once it arrives
                self.park(id, from, Message::MRec { id, ballot });
                return;
            }
            Phase::Commit | Phase::Execute => {
                // the recoverer learns committed timestamps through the
                // MCommitRequest path, not here
                return;
            }
            _ => {}
        }
        if record.bal >= ballot {
            let bal = record.bal;
            if from != self.id {
                fx.push(Effect::Send { to: vec![from], msg: Message::MRecNAck { id, ballot: bal } });
            }
            return;
        }
        if record.bal == 0 {
            match record.phase {
                Phase::Payload => {
                    // first time this process computes a proposal for id
                    let (ts, delta) = self.clock.fun_ts(id, 0);
                    fx.push(Effect::FunTs { id, ts });
                    self.merge_own_delta(&delta);
                    let record = self.records.get_mut(&id).expect("still there");
                    record.ts = ts;
                    record.transition(Phase::RecoverR, now);
                }
                Phase::Propose => {
                    self.records
                        .get_mut(&id)
                        .expect("still there")
                        .transition(Phase::RecoverP, now);
                }
                _ => unreachable!("pending with ballot 0 is payload or propose"),
            }
        }
        let record = self.records.get_mut(&id).expect("still there");
        record.bal = ballot;
        record.touch(now);
        let (ts, phase, abal) = (record.ts, record.phase, record.abal);
        fx.push(Effect::Send {
            to: vec![from],
            msg: Message::MRecAck { id, ts, phase, abal, ballot },
        });
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn handle_rec_ack(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ts: Timestamp,
        phase: Phase,
        abal: Ballot,
        ballot: Ballot,
        now: SimTime,
        fx: &mut Vec<Effect>,
    ) {
        let recovery_quorum = self.config.recovery_quorum_size();
        let Some(record) = self.records.get_mut(&id) else { return };
        if record.bal != ballot {
            return; // a higher ballot took over
        }
        let Some(tracker) = record.rec.as_mut() else { return };
        if tracker.done || tracker.ballot != ballot {
            return;
        }
        tracker.acks.insert(from, RecAckInfo { ts, phase, abal });
        if tracker.acks.len() < recovery_quorum {
            return;
        }
        tracker.done = true;
        let acks = tracker.acks.clone();
        record.touch(now);

        let accepted = acks
            .iter()
            .filter(|(_, info)| info.abal != 0)
            .max_by_key(|(j, info)| (info.abal, **j));
        let (value, event) = if let Some((_, info)) = accepted {
            // standard flexible-paxos rule: adopt the value accepted at the
            // highest ballot
            (info.ts, RecoveryEvent::AcceptedMax)
        } else {
            let quorum: Vec<ProcessId> = record
                .quorums
                .as_ref()
                .expect("pending records know the fast quorums")
                .members(self.id.partition)
                .expect("own partition present")
                .to_vec();
            let initial = quorum[0];
            let intersection: BTreeSet<ProcessId> = acks
                .keys()
                .copied()
                .filter(|j| quorum.contains(j))
                .collect();
            let s = intersection.contains(&initial)
                || intersection
                    .iter()
                    .any(|j| acks[j].phase == Phase::RecoverR);
            if s {
                // the fast path can no longer be taken: any majority max works
                let value = acks.values().map(|i| i.ts).max().expect("quorum non-empty");
                (value, RecoveryEvent::STrue)
            } else {
                // the initial coordinator may have committed fast; recompute
                // its timestamp from the surviving fast-quorum proposals
                let value = intersection
                    .iter()
                    .map(|j| acks[j].ts)
                    .max()
                    .expect("intersection holds at least floor(r/2) processes");
                (value, RecoveryEvent::SFalse)
            }
        };
        let record = self.records.get_mut(&id).expect("still there");
        record.consensus = Some(ConsensusTracker {
            value,
            ballot,
            acks: BTreeSet::new(),
            committed: false,
        });
        fx.push(Effect::Recovery { id, ballot, event });
        fx.push(Effect::Send {
            to: self.partition_peers(),
            msg: Message::MConsensus { id, ts: value, ballot },
        });
    }

    pub(crate) fn handle_rec_nack(
        &mut self,
        _from: ProcessId,
        id: CommandId,
        ballot: Ballot,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        if fd.leader_of(self.id.partition, self.config.r) != Some(self.id) {
            return;
        }
        let Some(record) = self.records.get_mut(&id) else { return };
        if record.bal >= ballot {
            return; // stale
        }
        record.bal = ballot;
        record.touch(now);
        self.recover(id, now, fx);
    }

    pub(crate) fn handle_commit_request(
        &mut self,
        from: ProcessId,
        id: CommandId,
        fx: &mut Vec<Effect>,
    ) {
        let Some(record) = self.records.get(&id) else { return };
        if !record.phase.is_committed_or_executed() {
            return;
        }
        let cmd = record.cmd.clone().expect("committed records know the payload");
        let quorums = record.quorums.clone().expect("committed records know the quorums");
        let ts = record.ts;
        fx.push(Effect::Send {
            to: vec![from],
            msg: Message::MPayload { id, cmd, quorums },
        });
        fx.push(Effect::Send {
            to: vec![from],
            msg: Message::MCommit {
                id,
                ts,
                partition: self.id.partition,
                relay: true,
                promises: Vec::new(),
            },
        });
    }

    /// Periodic liveness pass over stuck commands: resend payloads so every
    /// replica learns them, and, when this process is the partition leader,
    /// take over coordination of commands whose ballot it does not own.
    pub fn liveness_tick(&mut self, now: SimTime, fd: &FdView) -> Vec<Effect> {
        let mut fx = Vec::new();
        let is_leader = fd.leader_of(self.id.partition, self.config.r) == Some(self.id);
        let my_rank = self.id.rank();
        let ids: Vec<CommandId> = self.pending_ids.iter().copied().collect();
        for id in ids {
            let Some(record) = self.records.get(&id) else { continue };
            if now.saturating_sub(record.last_activity) < self.recovery_timeout_us {
                continue;
            }
            let cmd = record.cmd.clone().expect("pending records know the payload");
            let quorums = record.quorums.clone().expect("pending records know the quorums");
            let bal = record.bal;
            let targets: Vec<ProcessId> = self
                .procs_of(&cmd)
                .into_iter()
                .filter(|&j| j != self.id)
                .collect();
            fx.push(Effect::Send {
                to: targets,
                msg: Message::MPayload { id, cmd, quorums },
            });
            if is_leader && (bal == 0 || bal_leader(bal, self.config.r) != my_rank) {
                self.recover(id, now, &mut fx);
            }
        }
        // keep asking for commits of commands only known through promises
        let buffered: Vec<CommandId> = self.table.buffered_ids().collect();
        for id in buffered {
            if !self.phase_of(id).is_committed_or_executed() {
                self.maybe_commit_request(id, now, fd, &mut fx);
            }
        }
        fx
    }
}
