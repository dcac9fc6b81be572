//! The fast-path decision, row by row.
//!
//! Five replicas, coordinator A proposing timestamp 6. Each row presets the
//! peer clocks, runs the proposal round through the real handlers and shows
//! the computed timestamp, whether all proposals matched, and whether the
//! commit went through the fast path (highest proposal seen at least f
//! times) or had to fall back to consensus.
//!
//! Run with: cargo run --example fast_paths

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::Arc;
use tsmr::commit::{Effect, Message, Process};
use tsmr::core::{Command, CommandId, Config, FastQuorumMap, ProcessId, RttMatrix};
use tsmr::recovery::FdView;

fn run_row(f: usize, clocks: &[u64]) -> (u64, bool, bool) {
    let config = Config { r: 5, f, ..Config::default() };
    let rtt = Arc::new(
        RttMatrix::new(
            (0..5)
                .map(|a| (0..5).map(|b| if a == b { 0 } else { 50 }).collect())
                .collect(),
        )
        .unwrap(),
    );
    let fd = FdView::all_alive();
    let mut procs: BTreeMap<ProcessId, Process> = (0..5)
        .map(|site| {
            let id = ProcessId::new(0, site);
            (id, Process::new(id, config.clone(), rtt.clone()))
        })
        .collect();
    let quorum: Vec<ProcessId> = (0..clocks.len() as u16).map(|s| ProcessId::new(0, s)).collect();
    for (site, &clock) in clocks.iter().enumerate() {
        procs.get_mut(&ProcessId::new(0, site as u16)).unwrap().advance_clock(clock);
    }
    let coordinator = quorum[0];
    let id = CommandId { submitter: coordinator, seq: 0 };
    let cmd = Command::new(id, BTreeMap::from([(0, BTreeSet::from([0]))]), vec![]).unwrap();
    let quorums = FastQuorumMap::from_parts(BTreeMap::from([(0, quorum.clone())]));

    // drive the messages by hand: submit, proposals, acknowledgements;
    // FIFO keeps self-addressed messages first, as the protocol expects
    let mut inbox: std::collections::VecDeque<(ProcessId, ProcessId, Message)> =
        std::collections::VecDeque::from([(coordinator, coordinator, Message::MSubmit { id, cmd, quorums })]);
    let mut proposals = BTreeSet::new();
    let mut decision = None;
    while let Some((from, to, msg)) = inbox.pop_front() {
        let fx = procs.get_mut(&to).unwrap().handle(from, msg, 0, &fd);
        for effect in fx {
            match effect {
                Effect::Send { to: targets, msg } => {
                    for target in targets {
                        inbox.push_back((to, target, msg.clone()));
                    }
                }
                Effect::FunTs { ts, .. } => {
                    proposals.insert(ts);
                }
                Effect::CommitDecision { ts, fast, .. } => decision = Some((ts, fast)),
                _ => {}
            }
        }
        if decision.is_some() {
            break;
        }
    }
    let (ts, fast) = decision.expect("every row decides");
    (ts, proposals.len() == 1, fast)
}

fn main() {
    println!("r = 5, coordinator A proposes 6 (its clock is at 5)\n");
    println!("{:<6} {:<22} {:>3} {:>7} {:>10}", "row", "peer clocks", "t", "match", "fast path");
    let rows: [(usize, Vec<u64>); 4] = [
        (2, vec![5, 6, 10, 10]),
        (2, vec![5, 6, 10, 5]),
        (1, vec![5, 6, 10]),
        (1, vec![5, 5, 1]),
    ];
    for (label, (f, clocks)) in ["a", "b", "c", "d"].iter().zip(rows) {
        let (ts, matched, fast) = run_row(f, &clocks);
        println!(
            "{label}) f={f} {:<20} {ts:>3} {:>7} {:>10}",
            format!("{clocks:?}"),
            if matched { "yes" } else { "no" },
            if fast { "yes" } else { "no (slow)" },
        );
    }
    println!("\nWith f = 1 the highest proposal always appears at least once,");
    println!("so an f = 1 deployment commits on the fast path unconditionally.");
}
