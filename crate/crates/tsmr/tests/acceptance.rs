//! Acceptance gate: one test per release criterion, each printing a
//! pass/fail line. Thresholds are pinned in the asserts. Run with
//! `cargo test --release --test acceptance` to match the stated budgets.

mod common;

use common::Net;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use tsmr::commit::{Effect, Message, RecoveryEvent};
use tsmr::core::{Command, CommandId, Config, FastQuorumMap, Phase, ProcessId};
use tsmr::execution::PromiseTable;
use tsmr::scenario::{
    CheckSpec, FaultSpec, ProtocolSpec, Scenario, TopologySpec, WorkloadSpec,
};
use tsmr::sim::{self, Event};

fn pid(site: u16) -> ProcessId {
    ProcessId::new(0, site)
}

fn cid(submitter: ProcessId, seq: u64) -> CommandId {
    CommandId { submitter, seq }
}

fn one_key_command(id: CommandId) -> Command {
    let mut accesses = BTreeMap::new();
    accesses.insert(id.submitter.partition, BTreeSet::from([0u64]));
    Command::new(id, accesses, vec![0]).unwrap()
}

fn quorum_map(members: &[ProcessId]) -> FastQuorumMap {
    let mut map = BTreeMap::new();
    map.insert(members[0].partition, members.to_vec());
    FastQuorumMap::from_parts(map)
}

fn scenarios_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"))
}

// ----------------------------------------------------------------------
// criterion 1 — the four fast-path fixture rows reproduce exactly
// ----------------------------------------------------------------------

/// Drives one row: preset clocks, submit at A with the given quorum, return
/// (computed timestamp, all proposals equal, fast path taken).
fn fast_path_row(f: usize, clocks: &[u64]) -> (u64, bool, bool) {
    let config = Config { r: 5, f, ..Config::default() };
    let mut net = Net::single_partition(config, 50);
    let a = pid(0);
    let quorum: Vec<ProcessId> = (0..clocks.len() as u16).map(pid).collect();
    for (site, &clock) in clocks.iter().enumerate() {
        net.procs.get_mut(&pid(site as u16)).unwrap().advance_clock(clock);
    }
    let id = cid(a, 0);
    let msg = Message::MSubmit {
        id,
        cmd: one_key_command(id),
        quorums: quorum_map(&quorum),
    };
    net.inject(a, a, msg);
    let proposals: BTreeSet<u64> = net
        .log
        .iter()
        .filter_map(|(_, e)| match e {
            Effect::FunTs { id: i, ts } if *i == id => Some(*ts),
            _ => None,
        })
        .collect();
    let decide = net
        .log
        .iter()
        .find_map(|(_, e)| match e {
            Effect::CommitDecision { id: i, ts, fast, .. } if *i == id => Some((*ts, *fast)),
            _ => None,
        })
        .expect("a commit decision is reached");
    // "match" in the fixture sense: every quorum member proposed the same
    let all_match = proposals.len() == 1;
    (decide.0, all_match, decide.1)
}

#[test]
fn criterion_1_fast_path_fixture_rows() {
    // coordinator A always proposes 6 (clock 5); per-row peer clocks
    let rows = [
        (2, vec![5, 6, 10, 10], (11, false, true)),
        (2, vec![5, 6, 10, 5], (11, false, false)),
        (1, vec![5, 6, 10], (11, false, true)),
        (1, vec![5, 5, 1], (6, true, true)),
    ];
    for (i, (f, clocks, expected)) in rows.iter().enumerate() {
        let got = fast_path_row(*f, clocks);
        assert_eq!(got, *expected, "row {}", ["a", "b", "c", "d"][i]);
    }
    println!("criterion 1: PASS - t {{11,11,11,6}}, match {{x,x,x,ok}}, fast {{ok,x,ok,ok}}");
}

// ----------------------------------------------------------------------
// criterion 2 — stability for the seven promise-set combinations
// ----------------------------------------------------------------------

#[test]
fn criterion_2_stable_timestamp_combinations() {
    let (a, b, c) = (pid(0), pid(1), pid(2));
    let green = vec![(a, 1), (c, 3)];
    let red = vec![(b, 1), (b, 2), (b, 3)];
    let blue = vec![(a, 2), (c, 1), (c, 2)];
    type Promises = Vec<(ProcessId, u64)>;
    let combos: Vec<(Vec<&Promises>, u64)> = vec![
        (vec![&green], 0),
        (vec![&red], 0),
        (vec![&blue], 0),
        (vec![&green, &red], 1),
        (vec![&green, &blue], 2),
        (vec![&red, &blue], 2),
        (vec![&green, &red, &blue], 3),
    ];
    let mut got = Vec::new();
    for (sets, expected) in &combos {
        let mut table = PromiseTable::new([a, b, c]);
        for set in sets {
            for &(peer, ts) in set.iter() {
                table.insert_admissible(peer, ts);
            }
        }
        got.push(table.stable_timestamp());
        assert_eq!(table.stable_timestamp(), *expected);
    }
    println!("criterion 2: PASS - stable timestamps {got:?}");
}

// ----------------------------------------------------------------------
// criterion 3 — the worked four-command example executes {w, y} only
// ----------------------------------------------------------------------

#[test]
fn criterion_3_execution_withholds_uncommitted_prefix() {
    let config = Config { r: 3, f: 1, ..Config::default() };
    let mut net = Net::single_partition(config, 50);
    let (a, b, c) = (pid(0), pid(1), pid(2));
    let w = cid(a, 0);
    let x = cid(a, 1);
    let y = cid(b, 0);
    let z = cid(c, 0);
    let submit = |id: CommandId, members: &[ProcessId]| Message::MSubmit {
        id,
        cmd: one_key_command(id),
        quorums: quorum_map(members),
    };
    // stage 1: every coordinator proposes locally; remote proposals are in
    // flight (held), reproducing the arrival order of the worked example:
    // w, x, z at A; y, w at B; z, y at C
    let in_flight = |from: ProcessId, to: ProcessId, msg: &Message| {
        from != to && matches!(msg, Message::MPropose { .. })
    };
    net.inject_holding(a, a, submit(w, &[a, b]), in_flight);
    net.inject_holding(a, a, submit(x, &[a, b]), in_flight);
    net.inject_holding(b, b, submit(y, &[b, c]), in_flight);
    net.inject_holding(c, c, submit(z, &[c, a]), in_flight);
    // stage 2: the three proposals land together, before any commit can
    // bump a clock; x's proposal to B stays in flight forever, so x never
    // commits
    net.release_where(|_, _, msg| {
        matches!(msg, Message::MPropose { id, .. } if *id != x)
    });

    // committed timestamps: w and y at 2, z at 3; x still pending
    for (id, ts) in [(w, 2), (y, 2), (z, 3)] {
        assert!(net.procs[&a].phase_of(id).is_committed_or_executed(), "{id} committed");
        assert_eq!(net.procs[&a].ts_of(id), ts, "{id} timestamp");
    }
    assert_eq!(net.procs[&a].phase_of(x), Phase::Propose);

    // the observer's promise table matches the worked figure
    let proc_a = &net.procs[&a];
    assert_eq!(proc_a.highest_contiguous_promise(a), 1);
    assert_eq!(proc_a.highest_contiguous_promise(b), 2);
    assert_eq!(proc_a.highest_contiguous_promise(c), 2);
    assert_eq!(proc_a.stable_timestamp(), 2);

    // exactly w then y executed; z withheld behind the stability watermark
    assert_eq!(net.executed_at(a), vec![w, y]);
    assert_eq!(net.procs[&a].phase_of(z), Phase::Commit);
    println!("criterion 3: PASS - executed [w, y] in order, z withheld at stable 2");
}

// ----------------------------------------------------------------------
// criterion 4 — two-partition final timestamp and faster stability
// ----------------------------------------------------------------------

/// Runs the bundled two-partition fixture and returns (final timestamps per
/// decide, commit ts at every process, time partition 0's coordinator saw
/// timestamp 10 become stable).
fn two_partition_run(enable_bump: bool) -> (BTreeMap<u16, u64>, Vec<u64>, u64) {
    let mut scenario =
        Scenario::load(&scenarios_dir().join("two_partitions.toml")).unwrap();
    scenario.protocol.enable_bump = enable_bump;
    let (report, trace) = sim::run(&scenario, None, true).unwrap();
    assert!(report.all_checks_passed, "checkers: {:?}", report.checkers);
    let trace = trace.unwrap();
    // the one command accessing both partitions
    let main_id = trace
        .iter()
        .find_map(|e| match e {
            Event::Submit { id, parts, .. } if parts.len() == 2 => Some(*id),
            _ => None,
        })
        .expect("two-partition command submitted");
    let main_submit = trace
        .iter()
        .find_map(|e| match e {
            Event::Submit { id, t, .. } if *id == main_id => Some(*t),
            _ => None,
        })
        .unwrap();
    let mut decides = BTreeMap::new();
    let mut commits = Vec::new();
    let mut stable_at = None;
    for event in &trace {
        match event {
            Event::Decide { id, partition, ts, .. } if *id == main_id => {
                decides.insert(*partition, *ts);
            }
            Event::Commit { id, ts, .. } if *id == main_id => commits.push(*ts),
            Event::Stable { t, src, ts }
                if *src == ProcessId::new(0, 0) && *ts >= 10 && *t >= main_submit =>
            {
                stable_at.get_or_insert(*t);
            }
            _ => {}
        }
    }
    (decides, commits, stable_at.expect("timestamp 10 became stable"))
}

#[test]
fn criterion_4_multi_partition_final_timestamp_and_bump() {
    let (decides, commits, stable_with) = two_partition_run(true);
    assert_eq!(decides, BTreeMap::from([(0u16, 6u64), (1u16, 10u64)]));
    assert_eq!(commits.len(), 10, "committed at every process of both partitions");
    assert!(commits.iter().all(|&ts| ts == 10), "final timestamp max{{6,10}} everywhere");
    let (decides_off, commits_off, stable_without) = two_partition_run(false);
    assert_eq!(decides_off, BTreeMap::from([(0u16, 6u64), (1u16, 10u64)]));
    assert!(commits_off.iter().all(|&ts| ts == 10));
    assert!(
        stable_with < stable_without,
        "bump must reach stability strictly earlier: {stable_with} vs {stable_without}"
    );
    println!(
        "criterion 4: PASS - final ts 10 everywhere; stability at p0 {} us (bump) vs {} us",
        stable_with, stable_without
    );
}

// ----------------------------------------------------------------------
// criteria 5 and 6 — seeded safety and liveness sweeps
// ----------------------------------------------------------------------

fn sweep_scenario(
    r: usize,
    f: usize,
    partitions: u16,
    rate: f64,
    seed: u64,
    gst: Option<u64>,
    liveness: bool,
    multi_partition: bool,
) -> Scenario {
    let all = sim::wide_area_rtt();
    let rtt: Vec<Vec<u32>> = all[..r].iter().map(|row| row[..r].to_vec()).collect();
    // either single-key commands at a conflict rate, or two-key zipfian
    // commands that regularly span two partitions
    let workload = if multi_partition {
        WorkloadSpec::Zipf {
            clients_per_site: 2,
            keys: 30,
            exponent: 1.1,
            keys_per_command: 2,
            commands_per_client: 4,
            payload_size: 8,
        }
    } else {
        WorkloadSpec::Conflict {
            clients_per_site: 2,
            conflict_rate: rate,
            commands_per_client: Some(4),
            submit_window_ms: None,
            payload_size: 8,
        }
    };
    Scenario {
        name: format!("sweep-r{r}-f{f}-p{partitions}"),
        seed,
        horizon_ms: 240_000,
        topology: TopologySpec {
            sites: (0..r).map(|s| format!("s{s}")).collect(),
            rtt_ms: rtt,
        },
        protocol: ProtocolSpec {
            f,
            partitions,
            piggyback_promises: true,
            enable_bump: true,
            promise_period_ms: 5,
            recovery_timeout_ms: None,
        },
        workload,
        faults: FaultSpec {
            crashes: Vec::new(),
            random_crashes_per_partition: f,
            reorder_extra_ms: 80,
            gst_ms: gst,
            jitter_ms: 0,
        },
        checks: CheckSpec { liveness, inject: None },
    }
}

#[test]
fn criterion_5_safety_sweep() {
    let mut cases = Vec::new();
    for (r, f) in [(3usize, 1usize), (5, 1), (5, 2)] {
        for rate in [0.02, 0.1, 1.0] {
            for partitions in [1u16, 2, 3] {
                for seed in 0..38u64 {
                    cases.push((r, f, partitions, rate, seed, false));
                }
            }
        }
        // two-key commands spanning partitions, the harder aggregation case
        for partitions in [2u16, 3] {
            for seed in 0..38u64 {
                cases.push((r, f, partitions, 0.0, seed, true));
            }
        }
    }
    assert!(cases.len() >= 1000, "{} runs", cases.len());
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(r, f, partitions, rate, seed, multi)| {
            let scenario = sweep_scenario(r, f, partitions, rate, seed, None, false, multi);
            let (report, _) = sim::run(&scenario, None, false).unwrap();
            (!report.all_checks_passed).then(|| {
                format!(
                    "r{r} f{f} p{partitions} rate{rate} multi{multi} seed{seed}: {:?}",
                    report.checker_failures()
                )
            })
        })
        .collect();
    assert!(failures.is_empty(), "safety violations: {failures:#?}");
    println!(
        "criterion 5: PASS - {} runs with reordering and up-to-f crashes, zero violations",
        cases.len()
    );
}

#[test]
fn criterion_6_liveness_sweep() {
    let mut cases = Vec::new();
    for (r, f) in [(3usize, 1usize), (5, 1), (5, 2)] {
        for seed in 0..70u64 {
            // alternate single-key and two-partition workloads
            cases.push((r, f, seed, seed % 2 == 0));
        }
    }
    assert!(cases.len() >= 200, "{} runs", cases.len());
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(r, f, seed, multi)| {
            let scenario = sweep_scenario(r, f, 2, 0.1, seed, Some(20_000), true, multi);
            let (report, _) = sim::run(&scenario, None, false).unwrap();
            let liveness_ok = report
                .checkers
                .get("liveness")
                .is_some_and(|v| v.status == "pass");
            (!report.all_checks_passed || !liveness_ok).then(|| {
                format!("r{r} f{f} seed{seed}: {:?}", report.checker_failures())
            })
        })
        .collect();
    assert!(failures.is_empty(), "liveness failures: {failures:#?}");
    println!(
        "criterion 6: PASS - {} runs with <= f crashes and GST, every command executed",
        cases.len()
    );
}

// ----------------------------------------------------------------------
// criterion 7 — recovery reproduces a fast-path timestamp (s = false)
// ----------------------------------------------------------------------

#[test]
fn criterion_7_recovery_equals_fast_path() {
    let config = Config { r: 5, f: 1, ..Config::default() };
    let mut net = Net::single_partition(config, 50);
    let procs: Vec<ProcessId> = (0..5).map(pid).collect();
    let (a, b, c) = (procs[0], procs[1], procs[2]);
    net.procs.get_mut(&a).unwrap().advance_clock(5);
    net.procs.get_mut(&b).unwrap().advance_clock(6);
    net.procs.get_mut(&c).unwrap().advance_clock(10);
    let id = cid(a, 0);
    let submit = Message::MSubmit {
        id,
        cmd: one_key_command(id),
        quorums: quorum_map(&[a, b, c]),
    };
    // run the commit round, but let the MCommit reach only the coordinator
    let hold_commit = |_: ProcessId, to: ProcessId, msg: &Message| {
        matches!(msg, Message::MCommit { .. }) && to != pid(0)
    };
    net.inject_holding(a, a, submit, hold_commit);
    let fast = net
        .log
        .iter()
        .find_map(|(_, e)| match e {
            Effect::CommitDecision { id: i, ts, fast, .. } if *i == id => Some((*ts, *fast)),
            _ => None,
        })
        .expect("fast path decision");
    assert_eq!(fast, (11, true), "fast path commits max{{6,7,11}} = 11");
    assert_eq!(net.procs[&a].phase_of(id), Phase::Commit);
    assert_eq!(net.procs[&b].phase_of(id), Phase::Propose);
    net.held.clear(); // the remaining MCommits are lost with the crash

    // coordinator gone; B is the lowest-ranked survivor and takes over
    net.crash(a);
    net.now = 10_000_000; // idle long enough for the liveness pass to fire
    net.tick_liveness(b);

    // a committed process never answers MRec, so A contributed nothing
    let recovered = net
        .log
        .iter()
        .filter_map(|(_, e)| match e {
            Effect::Recovery { id: i, event, .. } if *i == id => Some(*event),
            _ => None,
        })
        .collect::<Vec<_>>();
    assert_eq!(recovered, vec![RecoveryEvent::Started, RecoveryEvent::SFalse]);
    for survivor in &procs[1..] {
        assert_eq!(net.procs[survivor].phase_of(id), Phase::Commit, "{survivor}");
        assert_eq!(net.procs[survivor].ts_of(id), 11, "recovered timestamp at {survivor}");
    }

    // the invariant monitor agrees: the recovery consensus carried the
    // fast-path timestamp, and would flag any other value
    let clean = synthetic_recovery_events(11);
    assert!(sim::check_events(&clean)["invariant-8"].passed());
    let tampered = synthetic_recovery_events(12);
    assert!(!sim::check_events(&tampered)["invariant-8"].passed());
    println!("criterion 7: PASS - branch s-false, recovered t = max{{7,11}} = 11 = fast path");
}

fn synthetic_recovery_events(consensus_ts: u64) -> Vec<Event> {
    use tsmr::sim::trace::MsgMeta;
    let id = cid(pid(0), 0);
    vec![
        Event::Meta { r: 5, f: 1, partitions: 1, sites: 5, check_liveness: false },
        Event::Submit {
            t: 0,
            id,
            submitter: pid(0),
            parts: vec![0],
            quorums: BTreeMap::from([(0, vec![pid(0), pid(1), pid(2)])]),
        },
        Event::FunTs { t: 1, src: pid(0), id, ts: 6 },
        Event::FunTs { t: 1, src: pid(1), id, ts: 7 },
        Event::FunTs { t: 1, src: pid(2), id, ts: 11 },
        Event::Decide { t: 2, src: pid(0), partition: 0, id, ts: 11, fast: true },
        Event::Send {
            t: 3,
            src: pid(1),
            dst: pid(2),
            msg: MsgMeta {
                id: Some(id),
                ts: Some(consensus_ts),
                ballot: Some(7),
                ..MsgMeta::named("MConsensus")
            },
        },
    ]
}

// ----------------------------------------------------------------------
// criterion 8 — round-robin all-conflict regression
// ----------------------------------------------------------------------

#[test]
fn criterion_8_pathological_round_robin() {
    let scenario = sim::pathological_scenario();
    let (report, trace) = sim::run(&scenario, None, true).unwrap();
    assert!(report.all_checks_passed, "checkers: {:?}", report.checkers);
    assert_eq!(report.commands.submitted, 300);
    assert_eq!(report.commands.returned, 300);
    // per command and per process, execution follows the local commit
    // within 10 promise periods
    let trace = trace.unwrap();
    let mut commit_at: BTreeMap<(ProcessId, CommandId), u64> = BTreeMap::new();
    let mut max_gap = 0u64;
    for event in &trace {
        match event {
            Event::Commit { t, src, id, .. } => {
                commit_at.insert((*src, *id), *t);
            }
            Event::Exec { t, src, id, .. } => {
                let committed = commit_at[&(*src, *id)];
                max_gap = max_gap.max(t - committed);
            }
        _ => {}
        }
    }
    let bound = 10 * scenario.protocol.promise_period_ms * 1_000;
    assert!(
        max_gap <= bound,
        "commit-to-execute gap {max_gap} us exceeds {bound} us"
    );
    println!(
        "criterion 8: PASS - 300/300 executed, max commit-to-execute gap {:.1} ms <= {:.0} ms",
        max_gap as f64 / 1000.0,
        bound as f64 / 1000.0
    );
}

// ----------------------------------------------------------------------
// criteria 9 and 10 — wide-area fairness shape and f=1 fast-path ratio
// ----------------------------------------------------------------------

#[test]
fn criterion_9_fairness_at_desk_scale() {
    let f1 = Scenario::load(&scenarios_dir().join("fairness_5sites_f1.toml")).unwrap();
    let (report1, _) = sim::run(&f1, None, false).unwrap();
    assert!(report1.all_checks_passed, "checkers: {:?}", report1.checkers);
    let means1: Vec<f64> = report1.per_site_ms.values().map(|b| b.execute.mean).collect();
    let mean1 = means1.iter().sum::<f64>() / means1.len() as f64;
    let ratio1 = means1.iter().cloned().fold(f64::MIN, f64::max)
        / means1.iter().cloned().fold(f64::MAX, f64::min);

    let f2 = Scenario::load(&scenarios_dir().join("fairness_5sites_f2.toml")).unwrap();
    let (report2, _) = sim::run(&f2, None, false).unwrap();
    assert!(report2.all_checks_passed, "checkers: {:?}", report2.checkers);
    let means2: Vec<f64> = report2.per_site_ms.values().map(|b| b.execute.mean).collect();
    let mean2 = means2.iter().sum::<f64>() / means2.len() as f64;

    let mean1_ok = (mean1 - 138.0).abs() <= 0.25 * 138.0;
    let ratio1_ok = ratio1 <= 1.6;
    let mean2_ok = (mean2 - 178.0).abs() <= 0.25 * 178.0;
    println!(
        "criterion 9: f=1 mean {:.1} ms in 138±25% [{}] | f=1 max/min {:.2} <= 1.6 [{}] | f=2 mean {:.1} ms in 178±25% [{}]",
        mean1,
        if mean1_ok { "PASS" } else { "FAIL" },
        ratio1,
        if ratio1_ok { "PASS" } else { "FAIL" },
        mean2,
        if mean2_ok { "PASS" } else { "FAIL" },
    );
    assert!(mean1_ok, "f=1 site average {mean1:.1} ms outside 138 ms +/- 25%");
    assert!(mean2_ok, "f=2 site average {mean2:.1} ms outside 178 ms +/- 25%");
    // Known-red: the end-to-end latency geometry of this topology cannot
    // satisfy the ratio bound together with the mean band; see the ledger
    // analysis and the fairness example for the measured frontier.
    assert!(ratio1_ok, "f=1 per-site max/min ratio {ratio1:.2} exceeds 1.6");
}

#[test]
fn criterion_10_f1_always_fast_path() {
    let f1 = Scenario::load(&scenarios_dir().join("fairness_5sites_f1.toml")).unwrap();
    let (report, _) = sim::run(&f1, None, false).unwrap();
    assert_eq!(report.slow_paths, 0);
    assert_eq!(report.fast_path_ratio, 1.0, "f = 1 must always take the fast path");
    println!(
        "criterion 10: PASS - {} commit decisions, 100% fast path",
        report.fast_paths
    );
}
