//! Execution-side handlers of the process state machine.

use crate::commit::{Effect, Message, OwnPromise, Process, PromiseBundle, PromiseDelta, SimTime};
use crate::core::{CommandId, PartitionId, Phase, ProcessId, Timestamp};
use crate::recovery::FdView;

impl Process {
    /// Folds promises this process just generated into its own table:
    /// detached are admissible right away, the attached one waits for the
    /// command to commit locally.
    pub(crate) fn merge_own_delta(&mut self, delta: &PromiseDelta) {
        if let Some((from, to)) = delta.detached {
            self.table.insert_admissible_range(self.id, from, to);
        }
        if let Some((id, ts)) = delta.attached {
            if self.phase_of(id).is_committed_or_executed() {
                self.table.insert_admissible(self.id, ts);
            } else {
                self.table.buffer_attached(id, self.id, ts);
            }
        }
    }

    /// Merges promises received from a peer. With `request_missing`, ids seen
    /// attached but not locally committed trigger an MCommitRequest.
    pub(crate) fn merge_bundle(
        &mut self,
        bundle: &PromiseBundle,
        now: SimTime,
        fd: &FdView,
        request_missing: bool,
        fx: &mut Vec<Effect>,
    ) {
        if bundle.from.partition != self.id.partition {
            // promises are partition-local; a commit broadcast can carry
            // bundles of sibling partitions, which are useless here
            return;
        }
        for &(from, to) in &bundle.detached {
            self.table.insert_admissible_range(bundle.from, from, to);
        }
        for &(id, ts) in &bundle.attached {
            if self.phase_of(id).is_committed_or_executed() {
                self.table.insert_admissible(bundle.from, ts);
            } else {
                self.table.buffer_attached(id, bundle.from, ts);
                if request_missing {
                    self.maybe_commit_request(id, now, fd, fx);
                }
            }
        }
    }

    /// Asks the processes that may have committed `id` to replay the payload
    /// and commit; rate-limited per id.
    pub(crate) fn maybe_commit_request(
        &mut self,
        id: CommandId,
        now: SimTime,
        _fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        let last = self.commit_requested_at.get(&id).copied();
        if last.is_some_and(|t| now.saturating_sub(t) < self.recovery_timeout_us) {
            return;
        }
        self.commit_requested_at.insert(id, now);
        // target everyone replicating the command when the payload is known,
        // otherwise fall back to the local partition
        let targets: Vec<ProcessId> = match self.records.get(&id).and_then(|r| r.cmd.as_ref()) {
            Some(cmd) => self.procs_of(cmd).into_iter().filter(|&j| j != self.id).collect(),
            None => self
                .partition_peers()
                .into_iter()
                .filter(|&j| j != self.id)
                .collect(),
        };
        if !targets.is_empty() {
            fx.push(Effect::Send { to: targets, msg: Message::MCommitRequest { id } });
        }
    }

    /// Periodic MPromises broadcast: per peer, ship only the slice of the
    /// local promise history not sent to that peer yet.
    pub fn flush_promises(&mut self, _now: SimTime) -> Vec<Effect> {
        let mut fx = Vec::new();
        let history_len = self.clock.history().len();
        let peers: Vec<ProcessId> = self.peer_sent.keys().copied().collect();
        for peer in peers {
            let sent = self.peer_sent[&peer];
            if sent >= history_len {
                continue;
            }
            let bundle = self.history_bundle(sent);
            self.peer_sent.insert(peer, history_len);
            fx.push(Effect::Send { to: vec![peer], msg: Message::MPromises { bundle } });
        }
        fx
    }

    pub fn has_unsent_promises(&self) -> bool {
        let history_len = self.clock.history().len();
        self.peer_sent.values().any(|&sent| sent < history_len)
    }

    /// A same-partition peer is suspected crashed: start over with full
    /// promise history for the survivors, so their tables converge even if
    /// the suspect was relaying.
    pub fn on_peer_suspected(&mut self, suspect: ProcessId) {
        if suspect.partition != self.id.partition || suspect == self.id {
            return;
        }
        for sent in self.peer_sent.values_mut() {
            *sent = 0;
        }
    }

    fn history_bundle(&self, from_index: usize) -> PromiseBundle {
        let mut bundle = PromiseBundle::empty(self.id);
        for entry in &self.clock.history()[from_index..] {
            match *entry {
                OwnPromise::Detached { from, to } => bundle.detached.push((from, to)),
                OwnPromise::Attached { id, ts } => bundle.attached.push((id, ts)),
            }
        }
        bundle
    }

    pub(crate) fn handle_promises(
        &mut self,
        bundle: PromiseBundle,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        self.merge_bundle(&bundle, now, fd, true, fx);
    }

    /// Highest contiguous promise known from `peer`.
    pub fn highest_contiguous_promise(&self, peer: ProcessId) -> Timestamp {
        self.table.highest_contiguous(peer)
    }

    /// Whether a promise by `peer` for `ts` is admitted (not just buffered).
    pub fn table_contains(&self, peer: ProcessId, ts: Timestamp) -> bool {
        self.table.contains(peer, ts)
    }

    /// Current stable timestamp as seen by this process.
    pub fn stable_timestamp(&self) -> Timestamp {
        self.table.stable_timestamp()
    }

    // ------------------------------------------------------------------
    // commit aggregation and ordered execution
    // ------------------------------------------------------------------

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn handle_commit(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ts: Timestamp,
        partition: PartitionId,
        relay: bool,
        promises: Vec<PromiseBundle>,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        for bundle in &promises {
            self.merge_bundle(bundle, now, fd, false, fx);
        }
        let record = self.record_mut(id, now);
        match record.phase {
            Phase::Start => {
                // no payload yet; park the commit (without the promises,
                // they are already merged) until the payload arrives
                self.park(
                    id,
                    from,
                    Message::MCommit { id, ts, partition, relay, promises: Vec::new() },
                );
                return;
            }
            Phase::Commit | Phase::Execute => return, // duplicate
            _ => {}
        }
        if relay {
            // a committed process answered an MCommitRequest with the final
            // timestamp; commit outright
            self.commit_now(id, ts, now, fd, fx);
            return;
        }
        record.part_commits.insert(partition, ts);
        record.touch(now);
        let have_all = record
            .cmd
            .as_ref()
            .expect("pending records know the payload")
            .partitions()
            .all(|q| record.part_commits.contains_key(&q));
        if have_all {
            let final_ts = record.part_commits.values().copied().max().expect("non-empty");
            self.commit_now(id, final_ts, now, fd, fx);
        }
    }

    fn commit_now(
        &mut self,
        id: CommandId,
        final_ts: Timestamp,
        now: SimTime,
        fd: &FdView,
        fx: &mut Vec<Effect>,
    ) {
        let own_partition = self.id.partition;
        let record = self.records.get_mut(&id).expect("committing a known record");
        record.ts = final_ts;
        record.transition(Phase::Commit, now);
        let own_part_ts = record
            .part_commits
            .get(&own_partition)
            .copied()
            .unwrap_or(final_ts);
        self.pending_ids.remove(&id);
        // parked messages cannot apply past commit; drop them
        self.drop_parked(id);
        self.exec.queue.insert((final_ts, id));
        // committing bumps the clock up to the final timestamp, feeding
        // stability across partitions
        let delta = self.clock.fun_bump(final_ts);
        self.merge_own_delta(&delta);
        self.table.admit(id);
        self.commit_requested_at.remove(&id);
        fx.push(Effect::Committed { id, ts: final_ts, own_part_ts });
        let _ = fd;
    }

    pub(crate) fn handle_bump(
        &mut self,
        from: ProcessId,
        id: CommandId,
        ts: Timestamp,
        now: SimTime,
        _fx: &mut Vec<Effect>,
    ) {
        let record = self.record_mut(id, now);
        match record.phase {
            Phase::Start => self.park(id, from, Message::MBump { id, ts }),
            Phase::Propose => {
                let delta = self.clock.fun_bump(ts);
                self.merge_own_delta(&delta);
            }
            // at any other phase the bump is useless or already covered
            _ => {}
        }
    }

    pub(crate) fn handle_stable(&mut self, from: ProcessId, id: CommandId, now: SimTime) {
        let record = self.record_mut(id, now);
        record.stable_witnesses.insert(from.partition);
    }

    /// Runs the ordered-execution loop: advance the stable watermark, then
    /// walk committed commands in `(timestamp, id)` order, exchanging
    /// MStable with the other accessed partitions and executing in place.
    /// Processing halts at the first command whose witnesses are incomplete.
    pub fn execution_step(&mut self, now: SimTime) -> Vec<Effect> {
        let mut fx = Vec::new();
        let stable = self.table.stable_timestamp();
        if stable > self.exec.stable {
            self.exec.stable = stable;
            fx.push(Effect::StableAdvanced { stable });
        }
        while let Some(&(ts, id)) = self.exec.queue.first() {
            if ts > self.exec.stable {
                break;
            }
            let own_partition = self.id.partition;
            let record = self.records.get_mut(&id).expect("queued commands have records");
            let cmd = record.cmd.clone().expect("committed commands have payloads");
            if !record.mstable_sent {
                record.mstable_sent = true;
                record.mstable_sent_at = now;
                record.stable_witnesses.insert(own_partition);
                let targets: Vec<ProcessId> = cmd
                    .partitions()
                    .filter(|&q| q != own_partition)
                    .flat_map(|q| {
                        (0..self.config.r as u16).map(move |site| ProcessId::new(q, site))
                    })
                    .collect();
                if !targets.is_empty() {
                    fx.push(Effect::Send { to: targets, msg: Message::MStable { id } });
                }
            }
            let record = self.records.get_mut(&id).expect("still there");
            let complete = cmd.partitions().all(|q| record.stable_witnesses.contains(&q));
            if !complete {
                // head-of-line blocking preserved; retransmit the witness
                // signal if it has been quiet for a long time
                if now.saturating_sub(record.mstable_sent_at) >= self.recovery_timeout_us {
                    record.mstable_sent_at = now;
                    let targets: Vec<ProcessId> = cmd
                        .partitions()
                        .filter(|&q| q != own_partition)
                        .flat_map(|q| {
                            (0..self.config.r as u16).map(move |site| ProcessId::new(q, site))
                        })
                        .collect();
                    if !targets.is_empty() {
                        fx.push(Effect::Send { to: targets, msg: Message::MStable { id } });
                    }
                }
                break;
            }
            record.transition(Phase::Execute, now);
            self.exec.queue.remove(&(ts, id));
            debug_assert!(
                self.exec.last_executed.is_none_or(|last| last < (ts, id)),
                "execution order regressed"
            );
            self.exec.last_executed = Some((ts, id));
            fx.push(Effect::Executed { cmd, ts });
        }
        fx
    }
}
