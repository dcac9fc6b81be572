//! Run monitors: replication properties checked over the event stream, plus
//! the end-of-run graph and liveness analyses. Every violation carries the
//! offending ids so a failing seed can be replayed and inspected.

use super::trace::Event;
use crate::core::{Ballot, CommandId, PartitionId, ProcessId, Timestamp};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Pass,
    Fail(Vec<String>),
    Skipped(String),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        !matches!(self, Verdict::Fail(_))
    }
}

#[derive(Debug, Clone)]
struct SubmitInfo {
    t: u64,
    submitter: ProcessId,
    parts: Vec<PartitionId>,
    quorums: BTreeMap<PartitionId, Vec<ProcessId>>,
}

/// All monitors over one run. Feed every event in emission order, then call
/// [`CheckerSet::finish`].
#[derive(Debug, Default)]
pub struct CheckerSet {
    r: usize,
    f: usize,
    partitions: u16,
    check_liveness: bool,

    submitted: HashMap<CommandId, SubmitInfo>,
    returns: BTreeMap<CommandId, u64>,
    crashes: BTreeMap<ProcessId, u64>,

    // per partition: reference execution order and each replica's position
    ref_seq: HashMap<PartitionId, Vec<CommandId>>,
    ref_index: HashMap<PartitionId, HashMap<CommandId, usize>>,
    positions: HashMap<ProcessId, usize>,
    last_exec: HashMap<ProcessId, (Timestamp, CommandId)>,

    // commit agreement
    decides: HashMap<(CommandId, PartitionId), Timestamp>,
    fast_decides: HashMap<(CommandId, PartitionId), Timestamp>,
    final_ts: HashMap<CommandId, Timestamp>,
    funts: HashMap<(CommandId, PartitionId), BTreeMap<ProcessId, Timestamp>>,

    // consensus bookkeeping
    consensus_sent: HashMap<(CommandId, PartitionId, Ballot), Timestamp>,
    consensus_acks: HashMap<(CommandId, PartitionId, Ballot), BTreeSet<ProcessId>>,
    chosen: HashMap<(CommandId, PartitionId), BTreeMap<Ballot, Timestamp>>,
    acked_ballot: HashMap<(ProcessId, CommandId), Ballot>,

    // stability
    stable: HashMap<ProcessId, Timestamp>,

    violations: BTreeMap<&'static str, Vec<String>>,
    saw_violation: bool,
}

const MAX_DETAILS: usize = 8;

impl CheckerSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn has_violation(&self) -> bool {
        self.saw_violation
    }

    fn violate(&mut self, checker: &'static str, detail: String) {
        self.saw_violation = true;
        let list = self.violations.entry(checker).or_default();
        if list.len() < MAX_DETAILS {
            list.push(detail);
        }
    }

    pub fn on_event(&mut self, ev: &Event) {
        match ev {
            Event::Meta { r, f, partitions, check_liveness, .. } => {
                self.r = *r;
                self.f = *f;
                self.partitions = *partitions;
                self.check_liveness = *check_liveness;
            }
            Event::Submit { t, id, submitter, parts, quorums } => {
                self.submitted.insert(
                    *id,
                    SubmitInfo {
                        t: *t,
                        submitter: *submitter,
                        parts: parts.clone(),
                        quorums: quorums.clone(),
                    },
                );
            }
            Event::Return { t, id } => {
                self.returns.insert(*id, *t);
            }
            Event::FunTs { src, id, ts, .. } => {
                self.funts
                    .entry((*id, src.partition))
                    .or_default()
                    .insert(*src, *ts);
            }
            Event::Decide { src, partition, id, ts, fast, .. } => {
                self.on_decide(*src, *partition, *id, *ts, *fast);
            }
            Event::Commit { src, id, ts, part_ts, .. } => {
                self.on_local_commit(*src, *id, *ts, *part_ts);
            }
            Event::Stable { src, ts, .. } => {
                self.stable.insert(*src, *ts);
            }
            Event::Exec { src, id, ts, .. } => {
                self.on_exec(*src, *id, *ts);
            }
            Event::Crash { t, src } => {
                self.crashes.insert(*src, *t);
            }
            Event::Send { src, msg, .. } => self.on_send(*src, msg),
            _ => {}
        }
    }

    fn on_send(&mut self, src: ProcessId, msg: &super::trace::MsgMeta) {
        match msg.name {
            "MConsensus" => {
                let (Some(id), Some(ts), Some(b)) = (msg.id, msg.ts, msg.ballot) else { return };
                let key = (id, src.partition, b);
                // consensus ballot ownership: reserved rank or a rotation above r
                let owner = crate::recovery::bal_leader(b, self.r);
                if b <= self.r as u64 && owner != src.rank() {
                    self.violate(
                        "invariant-1",
                        format!("{src} sent MConsensus({id}) at reserved ballot {b} it does not own"),
                    );
                }
                match self.consensus_sent.get(&key) {
                    Some(&prev) if prev != ts => self.violate(
                        "invariant-2",
                        format!("MConsensus({id}) ballot {b}: values {prev} and {ts}"),
                    ),
                    None => {
                        self.consensus_sent.insert(key, ts);
                    }
                    _ => {}
                }
                // a committed fast-path timestamp can never be contradicted
                if let Some(&fast_ts) = self.fast_decides.get(&(id, src.partition)) {
                    if ts != fast_ts {
                        self.violate(
                            "invariant-8",
                            format!(
                                "MConsensus({id}) ballot {b} carries {ts}, fast path committed {fast_ts}"
                            ),
                        );
                    }
                }
                // once a slow quorum chose a value at b0 < b, b must carry it
                let conflicts: Vec<(Ballot, Timestamp)> = self
                    .chosen
                    .get(&(id, src.partition))
                    .map(|chosen| {
                        chosen
                            .range(..b)
                            .filter(|(_, &t0)| t0 != ts)
                            .map(|(&b0, &t0)| (b0, t0))
                            .collect()
                    })
                    .unwrap_or_default();
                for (b0, t0) in conflicts {
                    self.violate(
                        "invariant-7",
                        format!("MConsensus({id}) ballot {b} carries {ts}, ballot {b0} chose {t0}"),
                    );
                }
            }
            "MConsensusAck" => {
                let (Some(id), Some(b)) = (msg.id, msg.ballot) else { return };
                let key = (id, src.partition, b);
                let acks = self.consensus_acks.entry(key).or_default();
                acks.insert(src);
                if acks.len() == self.f + 1 {
                    if let Some(&value) = self.consensus_sent.get(&key) {
                        self.chosen.entry((id, src.partition)).or_default().insert(b, value);
                    }
                }
                let highest = self.acked_ballot.entry((src, id)).or_insert(0);
                *highest = (*highest).max(b);
            }
            "MRecAck" => {
                let (Some(id), Some(b), Some(ab)) = (msg.id, msg.ballot, msg.abal) else { return };
                if ab >= b {
                    self.violate(
                        "invariant-3",
                        format!("{src} sent MRecAck({id}) with abal {ab} >= ballot {b}"),
                    );
                }
                if let Some(&acked) = self.acked_ballot.get(&(src, id)) {
                    if b > acked && (ab < acked || ab == 0) {
                        self.violate(
                            "invariant-4",
                            format!(
                                "{src} acked consensus({id}) at {acked} but reported abal {ab} at ballot {b}"
                            ),
                        );
                    }
                }
            }
            _ => {}
        }
    }

    fn on_decide(
        &mut self,
        _src: ProcessId,
        partition: PartitionId,
        id: CommandId,
        ts: Timestamp,
        fast: bool,
    ) {
        // property 1: per-partition commit timestamps agree across decisions
        match self.decides.get(&(id, partition)) {
            Some(&prev) if prev != ts => self.violate(
                "property-1",
                format!("{id} committed at partition {partition} with {prev} and {ts}"),
            ),
            None => {
                self.decides.insert((id, partition), ts);
            }
            _ => {}
        }
        if fast {
            self.fast_decides.entry((id, partition)).or_insert(ts);
            // a fast decision must agree with any consensus value already out
            let conflicting: Vec<String> = self
                .consensus_sent
                .iter()
                .filter(|((cid, p, _), &t0)| *cid == id && *p == partition && t0 != ts)
                .map(|((_, _, b), t0)| format!("ballot {b} value {t0}"))
                .collect();
            for c in conflicting {
                self.violate("invariant-8", format!("fast commit of {id} at {ts} contradicts {c}"));
            }
        }

        // property 2: the committed timestamp is a max over proposals by a
        // majority of the partition
        let outputs = self.funts.get(&(id, partition));
        let majority = self.r / 2 + 1;
        let ok = outputs.is_some_and(|m| {
            m.values().any(|&t| t == ts) && m.values().filter(|&&t| t <= ts).count() >= majority
        });
        if !ok {
            self.violate(
                "property-2",
                format!(
                    "commit of {id} at partition {partition} with {ts} not derivable from {} proposals",
                    outputs.map_or(0, |m| m.len())
                ),
            );
        }

        // property 3: on the fast path, any floor(r/2) fast-quorum members
        // besides the coordinator suffice to recover the timestamp
        if fast && self.r <= 5 {
            if let (Some(info), Some(outputs)) =
                (self.submitted.get(&id), self.funts.get(&(id, partition)))
            {
                if let Some(quorum) = info.quorums.get(&partition) {
                    let rest: Vec<ProcessId> = quorum[1..].to_vec();
                    let take = self.r / 2;
                    let mut failures = Vec::new();
                    for subset in subsets(&rest, take) {
                        let max = subset
                            .iter()
                            .filter_map(|j| outputs.get(j))
                            .copied()
                            .max()
                            .unwrap_or(0);
                        if max != ts {
                            failures.push(format!(
                                "{id}: subset {subset:?} recovers {max}, committed {ts}"
                            ));
                        }
                    }
                    for f in failures {
                        self.violate("property-3", f);
                    }
                }
            }
        }
    }

    fn on_local_commit(
        &mut self,
        src: ProcessId,
        id: CommandId,
        ts: Timestamp,
        part_ts: Timestamp,
    ) {
        // final timestamps agree everywhere
        match self.final_ts.get(&id) {
            Some(&prev) if prev != ts => self.violate(
                "property-1-final",
                format!("{id} committed with final timestamps {prev} and {ts}"),
            ),
            None => {
                self.final_ts.insert(id, ts);
            }
            _ => {}
        }
        // a stable watermark promises that everything at or below it is
        // already locally committed
        let stable = self.stable.get(&src).copied().unwrap_or(0);
        if part_ts <= stable {
            self.violate(
                "stability",
                format!(
                    "{src} committed {id} with partition timestamp {part_ts} after declaring {stable} stable"
                ),
            );
        }
    }

    fn on_exec(&mut self, src: ProcessId, id: CommandId, ts: Timestamp) {
        if !self.submitted.contains_key(&id) {
            self.violate("validity", format!("{src} executed unsubmitted {id}"));
            return;
        }
        // per-process execution order strictly increases in (ts, id)
        if let Some(&last) = self.last_exec.get(&src) {
            if last >= (ts, id) {
                self.violate(
                    "execution-order",
                    format!("{src} executed {id} at {ts} after {:?}", last),
                );
            }
        }
        self.last_exec.insert(src, (ts, id));

        let p = src.partition;
        let pos = self.positions.get(&src).copied().unwrap_or(0);
        let seq = self.ref_seq.entry(p).or_default();
        let mut problem = None;
        if pos < seq.len() {
            if seq[pos] != id {
                problem = Some((
                    "log-equality",
                    format!("{src} executed {id} at position {pos}, replicas executed {}", seq[pos]),
                ));
            }
        } else {
            let index = self.ref_index.entry(p).or_default();
            if index.contains_key(&id) {
                problem =
                    Some(("validity", format!("{id} executed twice within partition {p}")));
            }
            index.insert(id, pos);
            self.ref_seq.entry(p).or_default().push(id);
        }
        if let Some((checker, detail)) = problem {
            self.violate(checker, detail);
        }
        self.positions.insert(src, pos + 1);
    }

    /// End-of-run analyses and the verdict map.
    pub fn finish(mut self) -> BTreeMap<String, Verdict> {
        self.check_ordering();
        self.check_liveness_final();

        let mut verdicts = BTreeMap::new();
        for name in [
            "validity",
            "log-equality",
            "execution-order",
            "ordering",
            "liveness",
            "stability",
            "property-1",
            "property-1-final",
            "property-2",
            "property-3",
            "invariant-1",
            "invariant-2",
            "invariant-3",
            "invariant-4",
            "invariant-7",
            "invariant-8",
        ] {
            let verdict = match self.violations.remove(name) {
                Some(details) => Verdict::Fail(details),
                None => Verdict::Pass,
            };
            verdicts.insert(name.to_string(), verdict);
        }
        // liveness may be skipped rather than passed
        if let Some(reason) = self.liveness_skip_reason() {
            verdicts.insert("liveness".to_string(), Verdict::Skipped(reason));
        }
        verdicts
    }

    fn liveness_skip_reason(&self) -> Option<String> {
        if !self.check_liveness {
            return Some("not requested by the scenario".into());
        }
        let mut per_partition: BTreeMap<PartitionId, usize> = BTreeMap::new();
        for j in self.crashes.keys() {
            *per_partition.entry(j.partition).or_default() += 1;
        }
        if per_partition.values().any(|&c| c > self.f) {
            return Some("insufficient replicas: more than f crashes in a partition".into());
        }
        None
    }

    fn check_liveness_final(&mut self) {
        if self.liveness_skip_reason().is_some() {
            return;
        }
        let ids: Vec<(CommandId, SubmitInfo)> = self
            .submitted
            .iter()
            .map(|(id, info)| (*id, info.clone()))
            .collect();
        for (id, info) in ids {
            let submitter_crashed = self.crashes.contains_key(&info.submitter);
            let executed_somewhere = info.parts.iter().any(|p| {
                self.ref_index.get(p).is_some_and(|idx| idx.contains_key(&id))
            });
            if submitter_crashed && !executed_somewhere {
                continue; // fail-stop submitter, command may be lost
            }
            for &p in &info.parts {
                for site in 0..self.r as u16 {
                    let j = ProcessId::new(p, site);
                    if self.crashes.contains_key(&j) {
                        continue;
                    }
                    let done = self
                        .ref_index
                        .get(&p)
                        .and_then(|idx| idx.get(&id))
                        .is_some_and(|&k| self.positions.get(&j).copied().unwrap_or(0) > k);
                    if !done {
                        self.violate("liveness", format!("{id} never executed at {j}"));
                    }
                }
            }
        }
    }

    /// Acyclicity of execution precedence plus real-time order. Per-process
    /// execution edges collapse to the per-partition reference chains; the
    /// real-time relation is folded through a chain of timeline nodes over
    /// returns sorted by time.
    fn check_ordering(&mut self) {
        // assign every command a node up front, then append timeline nodes
        let mut node_ids: HashMap<CommandId, usize> = HashMap::new();
        let add = |id: CommandId, node_ids: &mut HashMap<CommandId, usize>| {
            let next = node_ids.len();
            node_ids.entry(id).or_insert(next);
        };
        for seq in self.ref_seq.values() {
            for id in seq {
                add(*id, &mut node_ids);
            }
        }
        for id in self.returns.keys() {
            add(*id, &mut node_ids);
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for seq in self.ref_seq.values() {
            for pair in seq.windows(2) {
                edges.push((node_ids[&pair[0]], node_ids[&pair[1]]));
            }
        }
        // timeline nodes: returns sorted by completion time
        let mut returned: Vec<(u64, CommandId)> =
            self.returns.iter().map(|(id, t)| (*t, *id)).collect();
        returned.sort_unstable();
        let timeline_base = node_ids.len();
        let timeline_len = returned.len();
        for (k, (_, id)) in returned.iter().enumerate() {
            edges.push((node_ids[id], timeline_base + k));
            if k + 1 < timeline_len {
                edges.push((timeline_base + k, timeline_base + k + 1));
            }
        }
        let return_times: Vec<u64> = returned.iter().map(|(t, _)| *t).collect();
        for (id, info) in &self.submitted {
            let Some(&d) = node_ids.get(id) else {
                continue; // never executed, cannot be in a cycle
            };
            // number of commands returned strictly before this submit
            let k = return_times.partition_point(|&t| t < info.t);
            if k > 0 {
                edges.push((timeline_base + k - 1, d));
            }
        }

        let n = timeline_base + timeline_len;
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            adjacency[a].push(b);
        }
        // iterative three-color DFS
        let mut color = vec![0u8; n];
        for start in 0..n {
            if color[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            color[start] = 1;
            while let Some(&mut (node, ref mut edge)) = stack.last_mut() {
                if *edge < adjacency[node].len() {
                    let next = adjacency[node][*edge];
                    *edge += 1;
                    match color[next] {
                        0 => {
                            color[next] = 1;
                            stack.push((next, 0));
                        }
                        1 => {
                            self.violate(
                                "ordering",
                                "cycle in execution/real-time precedence".to_string(),
                            );
                            return;
                        }
                        _ => {}
                    }
                } else {
                    color[node] = 2;
                    stack.pop();
                }
            }
        }
    }
}

/// All subsets of `items` of size `k` (tiny inputs only).
fn subsets(items: &[ProcessId], k: usize) -> Vec<Vec<ProcessId>> {
    let n = items.len();
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        out.push(pick.iter().map(|&i| items[i]).collect());
        if k == 0 {
            return out;
        }
        let mut i = k as isize - 1;
        while i >= 0 && pick[i as usize] == i as usize + n - k {
            i -= 1;
        }
        if i < 0 {
            return out;
        }
        let i = i as usize;
        pick[i] += 1;
        for j in i + 1..k {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

/// Convenience: run the full checker over a recorded event stream.
pub fn check_events(events: &[Event]) -> BTreeMap<String, Verdict> {
    let mut checker = CheckerSet::new();
    for ev in events {
        checker.on_event(ev);
    }
    checker.finish()
}
