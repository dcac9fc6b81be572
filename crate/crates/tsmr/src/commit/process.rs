use super::clock::PartitionClock;
use super::msg::{Message, PromiseBundle};
use super::record::{CommandRecord, ConsensusTracker, ProposeTracker};
use crate::core::{
    fast_quorums, Ballot, Command, CommandId, Config, FastQuorumMap, IdSource, Key,
    PartitionId, Phase, ProcessId, QuorumError, RttMatrix, Timestamp,
};
use crate::execution::{ExecutionState, PromiseTable};
use crate::recovery::FdView;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Simulated time in microseconds.
pub type SimTime = u64;

/// What a handler wants done: messages out, upcalls, and observations for
/// the checkers and trace.
#[derive(Debug, Clone)]
pub enum Effect {
    Send { to: Vec<ProcessId>, msg: Message },
    /// A timestamp proposal was computed via the clock for `id`.
    FunTs { id: CommandId, ts: Timestamp },
    /// A per-partition commit decision was reached here (fast or slow path).
    CommitDecision { id: CommandId, partition: PartitionId, ts: Timestamp, fast: bool },
    /// The command committed locally with its final timestamp.
    Committed { id: CommandId, ts: Timestamp, own_part_ts: Timestamp },
    /// The command was applied to the local partition state.
    Executed { cmd: Command, ts: Timestamp },
    /// The local stable watermark advanced.
    StableAdvanced { stable: Timestamp },
    Recovery { id: CommandId, ballot: Ballot, event: RecoveryEvent },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryEvent {
    /// MRec sent for a fresh ballot.
    Started,
    /// Some acknowledgement carried a previously accepted consensus value.
    AcceptedMax,
    /// Initial coordinator answered or a proposal was recomputed in recovery.
    STrue,
    /// Proposals recovered from the surviving fast-quorum members.
    SFalse,
}

impl RecoveryEvent {
    pub fn name(&self) -> &'static str {
        match self {
            RecoveryEvent::Started => "mrec",
            RecoveryEvent::AcceptedMax => "accepted-max",
            RecoveryEvent::STrue => "s-true",
            RecoveryEvent::SFalse => "s-false",
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SubmitError {
    #[error("not a replica of any accessed partition")]
    NotAReplica,
    #[error("unknown partition {0}")]
    UnknownPartition(PartitionId),
    #[error(transparent)]
    Quorum(#[from] QuorumError),
}

/// One replica of one partition: the strictly single-threaded state machine
/// driving commit, execution and recovery. Handlers run to completion, one
/// message at a time; all cross-process interaction goes through messages.
pub struct Process {
    pub(crate) id: ProcessId,
    pub(crate) config: Config,
    pub(crate) rtt: Arc<RttMatrix>,
    pub(crate) recovery_timeout_us: u64,
    ids: IdSource,
    pub(crate) clock: PartitionClock,
    pub(crate) records: BTreeMap<CommandId, CommandRecord>,
    parked: BTreeMap<CommandId, Vec<(ProcessId, Message)>>,
    pub(crate) table: PromiseTable,
    pub(crate) exec: ExecutionState,
    /// Per-peer watermark into the local promise history (delta sending).
    pub(crate) peer_sent: BTreeMap<ProcessId, usize>,
    pub(crate) pending_ids: BTreeSet<CommandId>,
    pub(crate) commit_requested_at: BTreeMap<CommandId, SimTime>,
}

impl Process {
    pub fn new(id: ProcessId, config: Config, rtt: Arc<RttMatrix>) -> Self {
        let max_rtt = (0..rtt.sites() as u16)
            .flat_map(|a| (0..rtt.sites() as u16).map(move |b| (a, b)))
            .map(|(a, b)| rtt.rtt_ms(a, b))
            .max()
            .unwrap_or(0) as u64;
        let recovery_timeout_us =
            config.recovery_timeout_ms.unwrap_or(5 * max_rtt.max(1)) * 1_000;
        let peers: Vec<ProcessId> = (0..config.r as u16)
            .map(|site| ProcessId::new(id.partition, site))
            .collect();
        Self {
            id,
            ids: IdSource::new(id),
            clock: PartitionClock::new(),
            records: BTreeMap::new(),
            parked: BTreeMap::new(),
            table: PromiseTable::new(peers.iter().copied()),
            exec: ExecutionState::default(),
            peer_sent: peers.iter().filter(|&&j| j != id).map(|&j| (j, 0)).collect(),
            pending_ids: BTreeSet::new(),
            commit_requested_at: BTreeMap::new(),
            recovery_timeout_us,
            config,
            rtt,
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn partition(&self) -> PartitionId {
        self.id.partition
    }

    pub fn clock_value(&self) -> Timestamp {
        self.clock.value()
    }

    pub fn stable(&self) -> Timestamp {
        self.exec.stable
    }

    pub fn recovery_timeout_us(&self) -> u64 {
        self.recovery_timeout_us
    }

    pub fn phase_of(&self, id: CommandId) -> Phase {
        self.records.get(&id).map_or(Phase::Start, |r| r.phase)
    }

    pub fn ts_of(&self, id: CommandId) -> Timestamp {
        self.records.get(&id).map_or(0, |r| r.ts)
    }

    pub fn ballot_of(&self, id: CommandId) -> Ballot {
        self.records.get(&id).map_or(0, |r| r.bal)
    }

    pub fn has_pending(&self) -> bool {
        !self.pending_ids.is_empty() || !self.table.buffered_is_empty()
    }

    /// Replicas of this process's partition, in rank order.
    pub fn partition_peers(&self) -> Vec<ProcessId> {
        (0..self.config.r as u16)
            .map(|site| ProcessId::new(self.id.partition, site))
            .collect()
    }

    /// All processes replicating a partition accessed by `cmd`.
    pub(crate) fn procs_of(&self, cmd: &Command) -> Vec<ProcessId> {
        let mut out = Vec::new();
        for p in cmd.partitions() {
            for site in 0..self.config.r as u16 {
                out.push(ProcessId::new(p, site));
            }
        }
        out
    }

    pub(crate) fn record_mut(&mut self, id: CommandId, now: SimTime) -> &mut CommandRecord {
        self.records.entry(id).or_insert_with(|| CommandRecord::new(now))
    }

    /// Pre-loads the clock; scripted fixtures use this to reproduce specific
    /// proposal interleavings. Burns detached promises like any bump.
    pub fn advance_clock(&mut self, t: Timestamp) {
        let delta = self.clock.fun_bump(t);
        self.merge_own_delta(&delta);
    }

    /// Submits a command on behalf of a client co-located with this process.
    pub fn submit(
        &mut self,
        accesses: BTreeMap<PartitionId, BTreeSet<Key>>,
        payload: Vec<u8>,
        fd: &FdView,
    ) -> Result<(CommandId, Vec<Effect>), SubmitError> {
        if !accesses.contains_key(&self.id.partition) {
            return Err(SubmitError::NotAReplica);
        }
        if let Some(&p) = accesses.keys().find(|p| **p >= self.config.partitions) {
            return Err(SubmitError::UnknownPartition(p));
        }
        let id = self.ids.next_id();
        let cmd = Command::new(id, accesses, payload).map_err(|_| SubmitError::NotAReplica)?;
        let quorums = fast_quorums(
            self.id,
            cmd.partitions(),
            &self.rtt,
            self.config.fast_quorum_size(),
            |j| fd.alive(j),
        )?;
        let coordinators: Vec<ProcessId> = quorums.coordinators().collect();
        let effects = vec![Effect::Send {
            to: coordinators,
            msg: Message::MSubmit { id, cmd, quorums },
        }];
        Ok((id, effects))
    }

    /// Protocol message dispatch. Returns the effects to apply; the caller
    /// delivers self-addressed sends back into this process immediately.
    pub fn handle(
        &mut self,
        from: ProcessId,
        msg: Message,
        now: SimTime,
        fd: &FdView,
    ) -> Vec<Effect> {
        let mut fx = Vec::new();
        self.dispatch(from, msg, now, fd, &mut fx);
        fx
    }

    pub(crate) fn dispatch(
        &mut self,
        from: ProcessId,
        msg: Message,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        match msg {
            Message::MSubmit { id, cmd, quorums } => {
                self.handle_submit(id, cmd, quorums, now, fx)
            }
            Message::MPayload { id, cmd, quorums } => {
                self.handle_payload(id, cmd, quorums, now, fd, fx)
            }
            Message::MPropose { id, cmd, quorums, ts } => {
                self.handle_propose(from, id, cmd, quorums, ts, now, fd, fx)
            }
            Message::MProposeAck { id, ts, promises } => {
                self.handle_propose_ack(from, id, ts, promises, now, fd, fx)
            }
            Message::MCommit { id, ts, partition, relay, promises } => {
                self.handle_commit(from, id, ts, partition, relay, promises, now, fd, fx)
            }
            Message::MConsensus { id, ts, ballot } => {
                self.handle_consensus(from, id, ts, ballot, now, fx)
            }
            Message::MConsensusAck { id, ballot } => {
                self.handle_consensus_ack(from, id, ballot, now, fx)
            }
            Message::MBump { id, ts } => self.handle_bump(from, id, ts, now, fx),
            Message::MPromises { bundle } => self.handle_promises(bundle, now, fd, fx),
            Message::MStable { id } => self.handle_stable(from, id, now),
            Message::MRec { id, ballot } => self.handle_rec(from, id, ballot, now, fx),
            Message::MRecAck { id, ts, phase, abal, ballot } => {
                self.handle_rec_ack(from, id, ts, phase, abal, ballot, now, fx)
            }
            Message::MRecNAck { id, ballot } => {
                self.handle_rec_nack(from, id, ballot, now, fd, fx)
            }
            Message::MCommitRequest { id } => self.handle_commit_request(from, id, fx),
        }
    }

    /// Parks a message whose precondition is not yet satisfied; it is retried
    /// on the next state change of `id`.
    pub(crate) fn park(&mut self, id: CommandId, from: ProcessId, msg: Message) {
        self.parked.entry(id).or_default().push((from, msg));
    }

    pub(crate) fn retry_parked(
        &mut self,
        id: CommandId,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        if let Some(queue) = self.parked.remove(&id) {
            for (from, msg) in queue {
                self.dispatch(from, msg, now, fd, fx);
            }
        }
    }

    pub(crate) fn drop_parked(&mut self, id: CommandId) {
        self.parked.remove(&id);
    }

    // ------------------------------------------------------------------
    // commit protocol handlers
    // ------------------------------------------------------------------

    fn handle_submit(
        &mut self,
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
        _now: SimTime,
        fx: &mut Vec<Effect>,
    ) {
        let p = self.id.partition;
        if quorums.coordinator(p) != Some(self.id) {
            log::warn!("{}: MSubmit({id}) but not the coordinator for {p}", self.id);
            return;
        }
        let proposal = self.clock.value() + 1;
        let members = quorums.members(p).expect("own partition in quorum map").to_vec();
        let payload_targets: Vec<ProcessId> = self
            .partition_peers()
            .into_iter()
            .filter(|j| !members.contains(j))
            .collect();
        fx.push(Effect::Send {
            to: members,
            msg: Message::MPropose { id, cmd: cmd.clone(), quorums: quorums.clone(), ts: proposal },
        });
        if !payload_targets.is_empty() {
            fx.push(Effect::Send {
                to: payload_targets,
                msg: Message::MPayload { id, cmd, quorums },
            });
        }
    }

    fn handle_payload(
        &mut self,
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        let record = self.record_mut(id, now);
        if record.phase != Phase::Start {
            // duplicate or late payload, drop
            return;
        }
        record.cmd = Some(cmd);
        record.quorums = Some(quorums);
        record.transition(Phase::Payload, now);
        self.pending_ids.insert(id);
        self.retry_parked(id, now, fd, fx);
    }

    #[allow(clippy::too_many_arguments)]
    fn handle_propose(
        &mut self,
        from: ProcessId,
        id: CommandId,
        cmd: Command,
        quorums: FastQuorumMap,
        proposal: Timestamp,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        let record = self.record_mut(id, now);
        if record.phase != Phase::Start {
            // once the id left start (e.g. a recovery already touched it),
            // this handler stays disabled forever
            return;
        }
        let accessed: Vec<PartitionId> = cmd.partitions().collect();
        record.cmd = Some(cmd);
        record.quorums = Some(quorums.clone());
        record.transition(Phase::Propose, now);
        self.pending_ids.insert(id);

        let (ts, delta) = self.clock.fun_ts(id, proposal);
        fx.push(Effect::FunTs { id, ts });
        self.merge_own_delta(&delta);
        let record = self.records.get_mut(&id).expect("just created");
        if record.abal == 0 {
            record.ts = ts;
        }
        // else: a consensus value was accepted before the proposal arrived;
        // keep it, or recovery could resurrect the proposal instead

        // the coordinator collects proposals from the whole fast quorum
        if quorums.coordinator(self.id.partition) == Some(self.id) {
            let members = quorums
                .members(self.id.partition)
                .expect("own partition present")
                .to_vec();
            record.propose = Some(ProposeTracker::new(members));
        }

        let bundle = self.config.piggyback_promises.then(|| self.delta_bundle(&delta));
        fx.push(Effect::Send {
            to: vec![from],
            msg: Message::MProposeAck { id, ts, promises: bundle },
        });

        // multi-partition: hand the proposal to the sibling coordinators'
        // partitions so their clocks move early
        if self.config.enable_bump {
            for q in accessed {
                if q == self.id.partition {
                    continue;
                }
                if let Some(target) = fd.closest_alive(q, self.id.site, &self.rtt, self.config.r) {
                    fx.push(Effect::Send { to: vec![target], msg: Message::MBump { id, ts } });
                }
            }
        }
        self.retry_parked(id, now, fd, fx);
    }

    #[allow(clippy::too_many_arguments)]
    fn handle_propose_ack(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ts: Timestamp,
        promises: Option<PromiseBundle>,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        if let Some(bundle) = &promises {
            self.merge_bundle(bundle, now, fd, false, fx);
        }
        let f = self.config.f;
        let rank = self.id.rank();
        let Some(record) = self.records.get_mut(&id) else { return };
        if record.phase != Phase::Propose {
            // recovery or a commit overtook the fast path
            return;
        }
        let Some(tracker) = record.propose.as_mut() else { return };
        if tracker.done || !tracker.expected.contains(&from) {
            return;
        }
        tracker.proposals.insert(from, ts);
        if let Some(bundle) = promises {
            tracker.bundles.push(bundle);
        }
        if !tracker.complete() {
            return;
        }
        tracker.done = true;
        let (max, count) = tracker.max_and_count();
        let bundles = tracker.bundles.clone();
        record.touch(now);
        let cmd = record.cmd.clone().expect("coordinator knows the payload");
        if count >= f {
            // fast path: the highest proposal is already recoverable.
            // Record the decision like an accepted consensus value at the
            // reserved ballot: for a multi-partition command this process
            // stays pending until the sibling partitions commit, and a
            // recovery reaching it meanwhile must adopt the decided
            // timestamp instead of recomputing one.
            if record.abal == 0 {
                debug_assert_eq!(record.bal, 0, "joined ballots leave the propose phase");
                record.bal = rank;
                record.abal = rank;
                record.ts = max;
            }
            fx.push(Effect::CommitDecision {
                id,
                partition: self.id.partition,
                ts: max,
                fast: true,
            });
            let targets = self.procs_of(&cmd);
            fx.push(Effect::Send {
                to: targets,
                msg: Message::MCommit {
                    id,
                    ts: max,
                    partition: self.id.partition,
                    relay: false,
                    promises: if self.config.piggyback_promises { bundles } else { Vec::new() },
                },
            });
        } else {
            // slow path: persist the timestamp at f + 1 processes first,
            // using the ballot reserved for the initial coordinator
            let ballot = rank;
            let record = self.records.get_mut(&id).expect("checked above");
            record.consensus = Some(ConsensusTracker {
                value: max,
                ballot,
                acks: BTreeSet::new(),
                committed: false,
            });
            fx.push(Effect::Send {
                to: self.partition_peers(),
                msg: Message::MConsensus { id, ts: max, ballot },
            });
        }
    }

    fn handle_consensus(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ts: Timestamp,
        ballot: Ballot,
        now: SimTime,
        fx: &mut Vec<Effect>,
    ) {
        let self_id = self.id;
        let record = self.record_mut(id, now);
        if record.bal > ballot {
            if from != self_id {
                let bal = record.bal;
                fx.push(Effect::Send { to: vec![from], msg: Message::MRecNAck { id, ballot: bal } });
            }
            return;
        }
        record.bal = ballot;
        record.abal = ballot;
        if !record.phase.is_committed_or_executed() {
            // committed records keep the final timestamp; accepting must not
            // regress it to the per-partition consensus value
            record.ts = ts;
        }
        record.touch(now);
        let delta = self.clock.fun_bump(ts);
        self.merge_own_delta(&delta);
        fx.push(Effect::Send { to: vec![from], msg: Message::MConsensusAck { id, ballot } });
    }

    fn handle_consensus_ack(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ballot: Ballot,
        now: SimTime,
        fx: &mut Vec<Effect>,
    ) {
        let Some(record) = self.records.get_mut(&id) else { return };
        if record.bal != ballot {
            return;
        }
        let Some(tracker) = record.consensus.as_mut() else { return };
        if tracker.committed || tracker.ballot != ballot {
            return;
        }
        tracker.acks.insert(from);
        if tracker.acks.len() < self.config.slow_quorum_size() {
            return;
        }
        tracker.committed = true;
        let value = tracker.value;
        record.touch(now);
        let bundles = record
            .propose
            .as_ref()
            .map(|t| t.bundles.clone())
            .unwrap_or_default();
        let cmd = record.cmd.clone().expect("pending records know the payload");
        fx.push(Effect::CommitDecision {
            id,
            partition: self.id.partition,
            ts: value,
            fast: false,
        });
        let targets = self.procs_of(&cmd);
        fx.push(Effect::Send {
            to: targets,
            msg: Message::MCommit {
                id,
                ts: value,
                partition: self.id.partition,
                relay: false,
                promises: if self.config.piggyback_promises { bundles } else { Vec::new() },
            },
        });
    }

    pub(crate) fn delta_bundle(
        &self,
        delta: &super::clock::PromiseDelta,
    ) -> PromiseBundle {
        PromiseBundle {
            from: self.id,
            detached: delta.detached.into_iter().collect(),
            attached: delta.attached.into_iter().collect(),
        }
    }
}
