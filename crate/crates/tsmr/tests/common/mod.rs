//! Scripted-message harness: drives a handful of processes by hand with
//! full control over delivery order, for protocol-level tests that need
//! exact interleavings.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use tsmr::commit::{Effect, Message, Process};
use tsmr::core::{Config, ProcessId, RttMatrix};
use tsmr::recovery::FdView;

pub struct Net {
    pub procs: BTreeMap<ProcessId, Process>,
    pub queue: VecDeque<(ProcessId, ProcessId, Message)>,
    pub held: Vec<(ProcessId, ProcessId, Message)>,
    /// Every effect each process ever produced, in order.
    pub log: Vec<(ProcessId, Effect)>,
    pub fd: FdView,
    pub crashed: BTreeSet<ProcessId>,
    pub now: u64,
}

impl Net {
    /// One partition, `r` replicas at sites `0..r`, uniform RTT.
    pub fn single_partition(config: Config, uniform_rtt_ms: u32) -> Self {
        let r = config.r;
        let rtt = RttMatrix::new(
            (0..r)
                .map(|a| {
                    (0..r)
                        .map(|b| if a == b { 0 } else { uniform_rtt_ms })
                        .collect()
                })
                .collect(),
        )
        .unwrap();
        Self::with_rtt(config, rtt)
    }

    pub fn with_rtt(config: Config, rtt: RttMatrix) -> Self {
        let rtt = Arc::new(rtt);
        let mut procs = BTreeMap::new();
        for p in 0..config.partitions {
            for site in 0..config.r as u16 {
                let id = ProcessId::new(p, site);
                procs.insert(id, Process::new(id, config.clone(), rtt.clone()));
            }
        }
        Self {
            procs,
            queue: VecDeque::new(),
            held: Vec::new(),
            log: Vec::new(),
            fd: FdView::all_alive(),
            crashed: BTreeSet::new(),
            now: 0,
        }
    }

    pub fn crash(&mut self, id: ProcessId) {
        self.crashed.insert(id);
        self.fd.suspect(id);
    }

    /// Feed a message directly (e.g. a crafted MSubmit) and process the
    /// fallout until the network is quiet.
    pub fn inject(&mut self, from: ProcessId, to: ProcessId, msg: Message) {
        self.queue.push_back((from, to, msg));
        self.run();
    }

    /// Same, but messages matching `hold` are parked in `self.held` instead
    /// of being delivered.
    pub fn inject_holding(
        &mut self,
        from: ProcessId,
        to: ProcessId,
        msg: Message,
        hold: impl Fn(ProcessId, ProcessId, &Message) -> bool,
    ) {
        self.queue.push_back((from, to, msg));
        self.run_holding(hold);
    }

    pub fn run(&mut self) {
        self.run_holding(|_, _, _| false);
    }

    pub fn run_holding(
        &mut self,
        hold: impl Fn(ProcessId, ProcessId, &Message) -> bool,
    ) {
        while let Some((from, to, msg)) = self.queue.pop_front() {
            if hold(from, to, &msg) {
                self.held.push((from, to, msg));
                continue;
            }
            self.deliver(from, to, msg);
        }
    }

    /// Releases every held message.
    pub fn release_held(&mut self) {
        let held = std::mem::take(&mut self.held);
        for (from, to, msg) in held {
            self.queue.push_back((from, to, msg));
        }
        self.run();
    }

    /// Releases only the held messages matching `pick`, then runs; the rest
    /// stay held.
    pub fn release_where(
        &mut self,
        pick: impl Fn(ProcessId, ProcessId, &Message) -> bool,
    ) {
        let held = std::mem::take(&mut self.held);
        for (from, to, msg) in held {
            if pick(from, to, &msg) {
                self.queue.push_back((from, to, msg));
            } else {
                self.held.push((from, to, msg));
            }
        }
        self.run();
    }

    fn deliver(&mut self, from: ProcessId, to: ProcessId, msg: Message) {
        if self.crashed.contains(&to) {
            return;
        }
        let fx = self
            .procs
            .get_mut(&to)
            .expect("known process")
            .handle(from, msg, self.now, &self.fd);
        self.absorb(to, fx);
        let fx = self.procs.get_mut(&to).unwrap().execution_step(self.now);
        self.absorb(to, fx);
    }

    pub fn absorb(&mut self, src: ProcessId, fx: Vec<Effect>) {
        for effect in fx {
            if let Effect::Send { to, msg } = &effect {
                for dst in to {
                    if self.crashed.contains(&src) {
                        continue;
                    }
                    self.queue.push_back((src, *dst, msg.clone()));
                }
            }
            self.log.push((src, effect));
        }
    }

    /// Periodic promise broadcast at one process.
    pub fn tick_promises(&mut self, id: ProcessId) {
        let fx = self.procs.get_mut(&id).unwrap().flush_promises(self.now);
        self.absorb(id, fx);
        self.run();
    }

    /// Liveness pass at one process (payload resends + leader recovery).
    pub fn tick_liveness(&mut self, id: ProcessId) {
        let fd = self.fd.clone();
        let fx = self.procs.get_mut(&id).unwrap().liveness_tick(self.now, &fd);
        self.absorb(id, fx);
        self.run();
    }

    /// The ids this process executed, in execution order.
    pub fn executed_at(&self, id: ProcessId) -> Vec<tsmr::CommandId> {
        self.log
            .iter()
            .filter_map(|(src, e)| match e {
                Effect::Executed { cmd, .. } if *src == id => Some(cmd.id),
                _ => None,
            })
            .collect()
    }
}
