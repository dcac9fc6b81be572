//! The deterministic discrete-event loop: virtual time, latency-modeled
//! delivery, fault injection, closed-loop clients and metric collection.

use super::checker::{CheckerSet, Verdict};
use super::report::{CommandCounts, LatencyBlock, LatencyStats, RunReport};
use super::trace::{Event, MsgMeta, TraceHasher};
use super::workload::{group_keys, ClosedLoop};
use crate::commit::{Effect, Message, Process};
use crate::core::{CommandId, Config, Key, PartitionId, ProcessId, RttMatrix, SiteId};
use crate::kv::KvState;
use crate::recovery::FdView;
use crate::scenario::{Scenario, ScenarioError, WorkloadSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq)]
enum SimMsg {
    Protocol(Message),
    /// Execution output of one partition travelling back to the submitter.
    ExecResult { id: CommandId, partition: PartitionId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SimEvent {
    Deliver { from: ProcessId, to: ProcessId, msg: SimMsg },
    PromiseTick { proc: usize },
    LivenessTick { proc: usize },
    ClientSubmit { client: usize },
    OpenSubmit { site: SiteId, keys: Vec<Key> },
    Crash { proc: usize },
    Suspect { proc: usize },
    Gst,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Queued {
    at: u64,
    seq: u64,
    event: SimEvent,
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// A command in flight from its submitter's point of view.
#[derive(Debug)]
struct LiveCommand {
    client: Option<usize>,
    site: SiteId,
    submitter: ProcessId,
    submitted_at: u64,
    needed: Vec<PartitionId>,
    got: BTreeSet<PartitionId>,
    committed_at: Option<u64>,
    returned: bool,
}

struct SiteSamples {
    commit_us: Vec<u64>,
    execute_us: Vec<u64>,
}

/// The simulator for one scenario and seed. Strictly single-threaded over
/// virtual time; identical inputs give identical traces, reports and hashes.
pub struct Sim {
    scenario: Scenario,
    seed: u64,
    config: Config,
    rtt: Arc<RttMatrix>,
    procs: Vec<Process>,
    kv: Vec<KvState>,
    crashed: Vec<bool>,
    fd: FdView,
    queue: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
    now: u64,
    horizon_us: u64,
    gst_us: Option<u64>,
    reorder_extra_us: u64,
    jitter_us: u64,
    chaos_rng: ChaCha12Rng,
    closed: Option<ClosedLoop>,
    open_keyspace: u64,
    payload: Vec<u8>,
    live: HashMap<CommandId, LiveCommand>,
    promise_tick_armed: Vec<bool>,
    liveness_tick_armed: Vec<bool>,
    // observers
    checker: CheckerSet,
    hasher: TraceHasher,
    trace: Option<Vec<Event>>,
    // metrics
    site_samples: Vec<SiteSamples>,
    counts: CommandCounts,
    fast_paths: u64,
    slow_paths: u64,
    recoveries: u64,
    inject_property1: bool,
    injected: bool,
}

impl Sim {
    /// Builds a simulator. A seed override replaces the scenario's seed.
    pub fn new(
        scenario: &Scenario,
        seed_override: Option<u64>,
        record_trace: bool,
    ) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let seed = seed_override.unwrap_or(scenario.seed);
        let config = scenario.config();
        let rtt = Arc::new(scenario.rtt()?);
        let r = config.r;
        let partitions = config.partitions;
        let mut procs = Vec::with_capacity(partitions as usize * r);
        let mut kv = Vec::with_capacity(procs.capacity());
        for p in 0..partitions {
            for site in 0..r as u16 {
                procs.push(Process::new(ProcessId::new(p, site), config.clone(), rtt.clone()));
                kv.push(KvState::new(p));
            }
        }
        let closed = ClosedLoop::build(scenario, seed);
        let (open_keyspace, payload) = match &scenario.workload {
            WorkloadSpec::RoundRobin { payload_size, .. } => {
                (1, crate::kv::encode_put(&vec![0u8; *payload_size]))
            }
            WorkloadSpec::Script { script, payload_size } => {
                let max_key = script.iter().flat_map(|e| e.keys.iter()).max().copied().unwrap_or(0);
                (max_key + 1, crate::kv::encode_put(&vec![0u8; *payload_size]))
            }
            _ => (1, Vec::new()),
        };
        let n = procs.len();
        let mut sim = Self {
            seed,
            config,
            rtt,
            procs,
            kv,
            crashed: vec![false; n],
            fd: FdView::all_alive(),
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
            horizon_us: scenario.horizon_ms * 1_000,
            gst_us: scenario.faults.gst_ms.map(|ms| ms * 1_000),
            reorder_extra_us: scenario.faults.reorder_extra_ms * 1_000,
            jitter_us: scenario.faults.jitter_ms * 1_000,
            chaos_rng: ChaCha12Rng::seed_from_u64(seed ^ 0x6368_616f_735f_726e),
            closed,
            open_keyspace,
            payload,
            live: HashMap::new(),
            promise_tick_armed: vec![false; n],
            liveness_tick_armed: vec![false; n],
            checker: CheckerSet::new(),
            hasher: TraceHasher::default(),
            trace: record_trace.then(Vec::new),
            site_samples: (0..scenario.r())
                .map(|_| SiteSamples { commit_us: Vec::new(), execute_us: Vec::new() })
                .collect(),
            counts: CommandCounts::default(),
            fast_paths: 0,
            slow_paths: 0,
            recoveries: 0,
            inject_property1: scenario.checks.inject.as_deref() == Some("property1"),
            injected: false,
            scenario: scenario.clone(),
        };
        sim.init();
        Ok(sim)
    }

    fn init(&mut self) {
        self.emit(Event::Meta {
            r: self.config.r,
            f: self.config.f,
            partitions: self.config.partitions,
            sites: self.scenario.r(),
            check_liveness: self.scenario.checks.liveness,
        });
        // faults
        let mut crash_at: BTreeMap<ProcessId, u64> = BTreeMap::new();
        for crash in &self.scenario.faults.crashes {
            crash_at.insert(ProcessId::new(crash.partition, crash.site), crash.at_ms * 1_000);
        }
        if self.scenario.faults.random_crashes_per_partition > 0 {
            let mut rng = ChaCha12Rng::seed_from_u64(self.seed ^ 0x6372_6173_685f_726e);
            let window = (self.horizon_us / 2).max(1);
            for p in 0..self.config.partitions {
                let mut sites: Vec<u16> = (0..self.config.r as u16).collect();
                for _ in 0..self.scenario.faults.random_crashes_per_partition {
                    if sites.is_empty() {
                        break;
                    }
                    let pick = rng.random_range(0..sites.len());
                    let site = sites.swap_remove(pick);
                    crash_at
                        .entry(ProcessId::new(p, site))
                        .or_insert_with(|| rng.random_range(0..window));
                }
            }
        }
        for (pid, at) in crash_at {
            let proc_ = self.proc_index(pid);
            self.schedule(at, SimEvent::Crash { proc: proc_ });
        }
        if let Some(gst) = self.gst_us {
            self.schedule(gst, SimEvent::Gst);
        }
        // workload
        if let Some(closed) = &self.closed {
            for client in 0..closed.clients.len() {
                self.schedule(0, SimEvent::ClientSubmit { client });
            }
        }
        match self.scenario.workload.clone() {
            WorkloadSpec::RoundRobin { commands, interval_ms, .. } => {
                let sites = self.scenario.r() as u16;
                for k in 0..commands {
                    self.schedule(
                        k * interval_ms * 1_000,
                        SimEvent::OpenSubmit { site: (k % sites as u64) as u16, keys: vec![0] },
                    );
                }
            }
            WorkloadSpec::Script { script, .. } => {
                for entry in script {
                    self.schedule(
                        entry.at_ms * 1_000,
                        SimEvent::OpenSubmit { site: entry.site, keys: entry.keys },
                    );
                }
            }
            _ => {}
        }
    }

    fn proc_index(&self, pid: ProcessId) -> usize {
        pid.partition as usize * self.config.r + pid.site as usize
    }

    fn schedule(&mut self, at: u64, event: SimEvent) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued { at, seq, event }));
    }

    fn emit(&mut self, ev: Event) {
        self.hasher.fold(&ev);
        self.checker.on_event(&ev);
        if let Some(trace) = &mut self.trace {
            trace.push(ev);
        }
    }

    /// Runs to quiescence, the horizon, or the first checker violation.
    pub fn run(mut self) -> (RunReport, Option<Vec<Event>>) {
        while let Some(Reverse(next)) = self.queue.pop() {
            if next.at > self.horizon_us {
                break;
            }
            if self.checker.has_violation() {
                break;
            }
            self.now = next.at;
            self.step(next.event);
        }
        self.finish()
    }

    fn step(&mut self, event: SimEvent) {
        match event {
            SimEvent::Deliver { from, to, msg } => {
                let to_idx = self.proc_index(to);
                if self.crashed[to_idx] {
                    if let SimMsg::Protocol(m) = &msg {
                        let meta = msg_meta(m);
                        self.emit(Event::Drop { t: self.now, src: from, dst: to, msg: meta });
                    }
                    return;
                }
                match msg {
                    SimMsg::Protocol(m) => {
                        let fx = self.procs[to_idx].handle(from, m, self.now, &self.fd);
                        self.cascade(to_idx, fx);
                    }
                    SimMsg::ExecResult { id, partition } => {
                        self.mark_result(id, partition);
                    }
                }
            }
            SimEvent::PromiseTick { proc } => {
                self.promise_tick_armed[proc] = false;
                if self.crashed[proc] {
                    return;
                }
                let fx = self.procs[proc].flush_promises(self.now);
                self.cascade(proc, fx);
            }
            SimEvent::LivenessTick { proc } => {
                self.liveness_tick_armed[proc] = false;
                if self.crashed[proc] {
                    return;
                }
                let fx = self.procs[proc].liveness_tick(self.now, &self.fd);
                self.cascade(proc, fx);
            }
            SimEvent::ClientSubmit { client } => self.client_submit(client),
            SimEvent::OpenSubmit { site, keys } => self.open_submit(site, &keys),
            SimEvent::Crash { proc } => {
                if self.crashed[proc] {
                    return;
                }
                self.crashed[proc] = true;
                let pid = self.procs[proc].id();
                self.emit(Event::Crash { t: self.now, src: pid });
                let delay = 3 * self.config.promise_period_ms * 1_000;
                self.schedule(self.now + delay, SimEvent::Suspect { proc });
            }
            SimEvent::Suspect { proc } => {
                let suspect = self.procs[proc].id();
                self.fd.suspect(suspect);
                self.emit(Event::Suspect { t: self.now, src: suspect });
                // survivors re-send their full promise history
                for site in 0..self.config.r as u16 {
                    let peer = ProcessId::new(suspect.partition, site);
                    let idx = self.proc_index(peer);
                    if peer == suspect || self.crashed[idx] {
                        continue;
                    }
                    self.procs[idx].on_peer_suspected(suspect);
                    self.arm_timers(idx);
                }
            }
            SimEvent::Gst => self.emit(Event::Gst { t: self.now }),
        }
    }

    // ------------------------------------------------------------------
    // submission
    // ------------------------------------------------------------------

    fn client_submit(&mut self, client: usize) {
        let now = self.now;
        let partitions = self.config.partitions;
        let prepared = {
            let Some(closed) = self.closed.as_mut() else { return };
            if closed.clients[client].done || closed.clients[client].waiting {
                return;
            }
            if closed.submit_window_us.is_some_and(|w| now >= w) {
                closed.clients[client].done = true;
                return;
            }
            if let Some(left) = closed.clients[client].commands_left.as_mut() {
                if *left == 0 {
                    closed.clients[client].done = true;
                    return;
                }
                *left -= 1;
            }
            let site = closed.clients[client].site;
            let keys = closed.next_keys(client);
            let accesses = closed.accesses(&keys, partitions);
            let payload = closed.payload();
            closed.clients[client].waiting = true;
            (site, accesses, payload)
        };
        let (site, accesses, payload) = prepared;
        if !self.submit(site, accesses, payload, Some(client)) {
            // the co-located process crashed or cannot form quorums; this
            // client is effectively gone
            if let Some(closed) = self.closed.as_mut() {
                closed.clients[client].done = true;
                closed.clients[client].waiting = false;
            }
        }
    }

    fn open_submit(&mut self, site: SiteId, keys: &[Key]) {
        let accesses = group_keys(keys, self.open_keyspace, self.config.partitions);
        let payload = self.payload.clone();
        self.submit(site, accesses, payload, None);
    }

    fn submit(
        &mut self,
        site: SiteId,
        accesses: BTreeMap<PartitionId, BTreeSet<Key>>,
        payload: Vec<u8>,
        client: Option<usize>,
    ) -> bool {
        let needed: Vec<PartitionId> = accesses.keys().copied().collect();
        let submitter = ProcessId::new(needed[0], site);
        let submitter_idx = self.proc_index(submitter);
        if self.crashed[submitter_idx] {
            return false;
        }
        let result = self.procs[submitter_idx].submit(accesses, payload, &self.fd);
        let (id, fx) = match result {
            Ok(pair) => pair,
            Err(err) => {
                log::debug!("{submitter}: submit failed: {err}");
                return false;
            }
        };
        // pull the chosen quorums out of the MSubmit for the trace
        let quorums: BTreeMap<PartitionId, Vec<ProcessId>> = fx
            .iter()
            .find_map(|e| match e {
                Effect::Send { msg: Message::MSubmit { quorums, .. }, .. } => Some(
                    quorums
                        .partitions()
                        .map(|p| (p, quorums.members(p).expect("present").to_vec()))
                        .collect(),
                ),
                _ => None,
            })
            .unwrap_or_default();
        self.counts.submitted += 1;
        self.live.insert(
            id,
            LiveCommand {
                client,
                site,
                submitter,
                submitted_at: self.now,
                needed: needed.clone(),
                got: BTreeSet::new(),
                committed_at: None,
                returned: false,
            },
        );
        self.emit(Event::Submit { t: self.now, id, submitter, parts: needed, quorums });
        self.cascade(submitter_idx, fx);
        true
    }

    // ------------------------------------------------------------------
    // effect cascade
    // ------------------------------------------------------------------

    /// Applies the effects of one handler invocation at `proc`, delivering
    /// self-addressed messages immediately and running the execution step
    /// afterwards, until the process is quiescent at this instant.
    fn cascade(&mut self, proc: usize, fx: Vec<Effect>) {
        let mut agenda: VecDeque<(ProcessId, Message)> = VecDeque::new();
        self.apply_fx(proc, fx, &mut agenda);
        loop {
            while let Some((from, msg)) = agenda.pop_front() {
                let fx = self.procs[proc].handle(from, msg, self.now, &self.fd);
                self.apply_fx(proc, fx, &mut agenda);
            }
            let fx = self.procs[proc].execution_step(self.now);
            if fx.is_empty() {
                break;
            }
            self.apply_fx(proc, fx, &mut agenda);
            if agenda.is_empty() {
                break;
            }
        }
        self.arm_timers(proc);
    }

    fn arm_timers(&mut self, proc: usize) {
        if self.crashed[proc] {
            return;
        }
        if !self.promise_tick_armed[proc] && self.procs[proc].has_unsent_promises() {
            self.promise_tick_armed[proc] = true;
            let at = self.now + self.config.promise_period_ms * 1_000;
            self.schedule(at, SimEvent::PromiseTick { proc });
        }
        if !self.liveness_tick_armed[proc] && self.procs[proc].has_pending() {
            self.liveness_tick_armed[proc] = true;
            let at = self.now + self.procs[proc].recovery_timeout_us();
            self.schedule(at, SimEvent::LivenessTick { proc });
        }
    }

    fn apply_fx(
        &mut self,
        proc: usize,
        fx: Vec<Effect>,
        agenda: &mut VecDeque<(ProcessId, Message)>,
    ) {
        let src = self.procs[proc].id();
        for effect in fx {
            match effect {
                Effect::Send { to, msg } => {
                    let meta = msg_meta(&msg);
                    for dst in to {
                        self.emit(Event::Send { t: self.now, src, dst, msg: meta });
                        if dst == src {
                            agenda.push_back((src, msg.clone()));
                        } else {
                            self.schedule_delivery(src, dst, SimMsg::Protocol(msg.clone()));
                        }
                    }
                }
                Effect::FunTs { id, ts } => {
                    self.emit(Event::FunTs { t: self.now, src, id, ts });
                }
                Effect::CommitDecision { id, partition, ts, fast } => {
                    if fast {
                        self.fast_paths += 1;
                    } else {
                        self.slow_paths += 1;
                    }
                    self.emit(Event::Decide { t: self.now, src, partition, id, ts, fast });
                    if self.inject_property1 && !self.injected {
                        // checker self-test: fabricate a contradictory
                        // decision for the same id and partition
                        self.injected = true;
                        self.emit(Event::Decide {
                            t: self.now,
                            src,
                            partition,
                            id,
                            ts: ts + 1,
                            fast,
                        });
                    }
                }
                Effect::Committed { id, ts, own_part_ts } => {
                    self.emit(Event::Commit { t: self.now, src, id, ts, part_ts: own_part_ts });
                    if let Some(cmd) = self.live.get_mut(&id) {
                        if cmd.submitter == src && cmd.committed_at.is_none() {
                            cmd.committed_at = Some(self.now);
                            let sample = self.now - cmd.submitted_at;
                            self.site_samples[cmd.site as usize].commit_us.push(sample);
                        }
                    }
                }
                Effect::Executed { cmd, ts } => {
                    let id = cmd.id;
                    self.counts.exec_upcalls += 1;
                    self.kv[proc].exec_apply(&cmd);
                    self.emit(Event::Exec { t: self.now, src, id, ts });
                    let submitter = id.submitter;
                    if submitter == src {
                        self.mark_result(id, src.partition);
                    } else if submitter.partition != src.partition {
                        // ship this partition's output to the submitter
                        self.schedule_delivery(
                            src,
                            submitter,
                            SimMsg::ExecResult { id, partition: src.partition },
                        );
                    }
                }
                Effect::StableAdvanced { stable } => {
                    self.emit(Event::Stable { t: self.now, src, ts: stable });
                }
                Effect::Recovery { id, ballot, event } => {
                    if event == crate::commit::RecoveryEvent::Started {
                        self.recoveries += 1;
                    }
                    self.emit(Event::Recovery {
                        t: self.now,
                        src,
                        id,
                        ballot,
                        branch: event.name(),
                    });
                }
            }
        }
    }

    fn schedule_delivery(&mut self, from: ProcessId, to: ProcessId, msg: SimMsg) {
        let mut delay = self.rtt.one_way_us(from.site, to.site);
        if self.jitter_us > 0 {
            delay += self.chaos_rng.random_range(0..=self.jitter_us);
        }
        if self.reorder_extra_us > 0 && self.gst_us.is_none_or(|gst| self.now < gst) {
            delay += self.chaos_rng.random_range(0..=self.reorder_extra_us);
        }
        self.schedule(self.now + delay, SimEvent::Deliver { from, to, msg });
    }

    fn mark_result(&mut self, id: CommandId, partition: PartitionId) {
        let Some(cmd) = self.live.get_mut(&id) else { return };
        if cmd.returned {
            return;
        }
        cmd.got.insert(partition);
        if !cmd.needed.iter().all(|p| cmd.got.contains(p)) {
            return;
        }
        cmd.returned = true;
        let sample = self.now - cmd.submitted_at;
        let site = cmd.site;
        let client = cmd.client;
        self.counts.returned += 1;
        self.site_samples[site as usize].execute_us.push(sample);
        self.emit(Event::Return { t: self.now, id });
        self.live.remove(&id);
        if let (Some(client), Some(closed)) = (client, self.closed.as_mut()) {
            closed.clients[client].waiting = false;
            self.schedule(self.now, SimEvent::ClientSubmit { client });
        }
    }

    // ------------------------------------------------------------------
    // reporting
    // ------------------------------------------------------------------

    fn finish(self) -> (RunReport, Option<Vec<Event>>) {
        let verdicts = self.checker.finish();
        let all_checks_passed = verdicts.values().all(Verdict::passed);
        let mut per_site = BTreeMap::new();
        let mut all_commit = Vec::new();
        let mut all_execute = Vec::new();
        for (i, name) in self.scenario.topology.sites.iter().enumerate() {
            let samples = &self.site_samples[i];
            all_commit.extend_from_slice(&samples.commit_us);
            all_execute.extend_from_slice(&samples.execute_us);
            per_site.insert(
                name.clone(),
                LatencyBlock {
                    commit: LatencyStats::from_us(samples.commit_us.clone()),
                    execute: LatencyStats::from_us(samples.execute_us.clone()),
                },
            );
        }
        let decisions = self.fast_paths + self.slow_paths;
        let report = RunReport {
            schema_version: 1,
            scenario: self.scenario.name.clone(),
            seed: self.seed,
            r: self.config.r,
            f: self.config.f,
            partitions: self.config.partitions,
            commands: self.counts,
            fast_paths: self.fast_paths,
            slow_paths: self.slow_paths,
            recoveries: self.recoveries,
            fast_path_ratio: if decisions == 0 {
                1.0
            } else {
                self.fast_paths as f64 / decisions as f64
            },
            virtual_ms: self.now / 1_000,
            events: self.hasher.events(),
            latency_ms: LatencyBlock {
                commit: LatencyStats::from_us(all_commit),
                execute: LatencyStats::from_us(all_execute),
            },
            per_site_ms: per_site,
            checkers: verdicts.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            all_checks_passed,
            trace_hash: self.hasher.finish_hex(),
        };
        (report, self.trace)
    }
}

fn msg_meta(msg: &Message) -> MsgMeta {
    let mut meta = MsgMeta::named(msg.name());
    meta.id = msg.command_id();
    match msg {
        Message::MPropose { ts, .. }
        | Message::MProposeAck { ts, .. }
        | Message::MBump { ts, .. } => meta.ts = Some(*ts),
        Message::MCommit { ts, partition, relay, .. } => {
            meta.ts = Some(*ts);
            meta.partition = Some(*partition);
            meta.relay = Some(*relay);
        }
        Message::MConsensus { ts, ballot, .. } => {
            meta.ts = Some(*ts);
            meta.ballot = Some(*ballot);
        }
        Message::MConsensusAck { ballot, .. }
        | Message::MRec { ballot, .. }
        | Message::MRecNAck { ballot, .. } => meta.ballot = Some(*ballot),
        Message::MRecAck { ts, phase, abal, ballot, .. } => {
            meta.ts = Some(*ts);
            meta.phase = Some(*phase);
            meta.abal = Some(*abal);
            meta.ballot = Some(*ballot);
        }
        _ => {}
    }
    meta
}

/// Runs a scenario to completion.
pub fn run(
    scenario: &Scenario,
    seed_override: Option<u64>,
    record_trace: bool,
) -> Result<(RunReport, Option<Vec<Event>>), ScenarioError> {
    Ok(Sim::new(scenario, seed_override, record_trace)?.run())
}
