//! Deterministic discrete-event simulator: virtual time, latency-modeled
//! delivery, crash/reordering injection, closed-loop clients, correctness
//! checkers and run reports. Replica processing time is zero; only the wire
//! costs anything.

pub mod checker;
pub mod report;
pub mod trace;
pub mod workload;

mod runner;

pub use checker::{check_events, CheckerSet, Verdict};
pub use report::{CommandCounts, LatencyBlock, LatencyStats, RunReport};
pub use runner::{run, Sim};
pub use trace::{Event, TraceRecord};

use crate::scenario::{
    CheckSpec, FaultSpec, ProtocolSpec, Scenario, TopologySpec, WorkloadSpec,
};

/// The wide-area ping matrix used by the bundled fixtures, five sites:
/// Ireland, N. California, Singapore, Canada, S. Paulo.
pub const WIDE_AREA_SITES: [&str; 5] =
    ["ireland", "ncalifornia", "singapore", "canada", "spaulo"];

pub fn wide_area_rtt() -> Vec<Vec<u32>> {
    vec![
        vec![0, 141, 186, 72, 183],
        vec![141, 0, 181, 78, 190],
        vec![186, 181, 0, 221, 338],
        vec![72, 78, 221, 0, 123],
        vec![183, 190, 338, 123, 0],
    ]
}

/// The adversarial arrival pattern that starves dependency-ordered designs:
/// three replicas, every command conflicting, submissions interleaved
/// round-robin so each replica keeps observing a newer command. Timestamp
/// ordering executes all of them with a bounded commit-to-execute gap.
pub fn pathological_scenario() -> Scenario {
    Scenario {
        name: "pathological-round-robin".into(),
        seed: 1,
        horizon_ms: 120_000,
        topology: TopologySpec {
            sites: vec!["a".into(), "b".into(), "c".into()],
            rtt_ms: vec![vec![0, 50, 50], vec![50, 0, 50], vec![50, 50, 0]],
        },
        protocol: ProtocolSpec {
            f: 1,
            partitions: 1,
            piggyback_promises: true,
            enable_bump: true,
            promise_period_ms: 5,
            recovery_timeout_ms: None,
        },
        workload: WorkloadSpec::RoundRobin { commands: 300, interval_ms: 10, payload_size: 8 },
        faults: FaultSpec::default(),
        checks: CheckSpec { liveness: true, inject: None },
    }
}
