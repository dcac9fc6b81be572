//! Driving the replication engine without the simulator: the per-process
//! state machines are plain values — feed them messages, collect effects,
//! deliver. Useful for embedding the protocol under a different transport.
//!
//! Run with: cargo run --example embedded

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;
use tsmr::commit::{Effect, Message, Process};
use tsmr::core::{Config, ProcessId, RttMatrix};
use tsmr::recovery::FdView;

fn main() {
    let config = Config { r: 3, f: 1, ..Config::default() };
    let rtt = Arc::new(
        RttMatrix::new(vec![vec![0, 50, 60], vec![50, 0, 70], vec![60, 70, 0]]).unwrap(),
    );
    let fd = FdView::all_alive();
    let mut procs: BTreeMap<ProcessId, Process> = (0..3)
        .map(|site| {
            let id = ProcessId::new(0, site);
            (id, Process::new(id, config.clone(), rtt.clone()))
        })
        .collect();

    // a client co-located with replica 0 writes key 7
    let submitter = ProcessId::new(0, 0);
    let accesses = BTreeMap::from([(0u16, BTreeSet::from([7u64]))]);
    let payload = tsmr::kv::encode_put(b"hello");
    let (id, effects) = procs
        .get_mut(&submitter)
        .unwrap()
        .submit(accesses, payload, &fd)
        .unwrap();
    println!("submitted {id}");

    // a toy transport: instant delivery, FIFO
    let mut wire: VecDeque<(ProcessId, ProcessId, Message)> = VecDeque::new();
    let enqueue = |from: ProcessId, fx: Vec<Effect>, wire: &mut VecDeque<_>| {
        for effect in fx {
            match effect {
                Effect::Send { to, msg } => {
                    for dst in to {
                        println!("  {from} -> {dst}: {}", msg.name());
                        wire.push_back((from, dst, msg.clone()));
                    }
                }
                Effect::Committed { id, ts, .. } => {
                    println!("  {from} committed {id} at timestamp {ts}")
                }
                Effect::Executed { cmd, ts } => {
                    println!("  {from} executed {} at timestamp {ts}", cmd.id)
                }
                _ => {}
            }
        }
    };
    enqueue(submitter, effects, &mut wire);
    while let Some((from, to, msg)) = wire.pop_front() {
        let fx = procs.get_mut(&to).unwrap().handle(from, msg, 0, &fd);
        enqueue(to, fx, &mut wire);
        let fx = procs.get_mut(&to).unwrap().execution_step(0);
        enqueue(to, fx, &mut wire);
    }

    for (pid, proc_) in &procs {
        println!(
            "{pid}: clock {} stable {} phase {:?}",
            proc_.clock_value(),
            proc_.stable_timestamp(),
            proc_.phase_of(id)
        );
    }
}
