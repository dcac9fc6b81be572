//! Coordinator failure and takeover: a replica crashes mid-run with
//! commands in flight; the partition leader recovers their timestamps and
//! every survivor still executes the full sequence.
//!
//! Run with: cargo run --example recovery_takeover

use std::path::Path;
use tsmr::scenario::Scenario;
use tsmr::sim::{self, Event};

fn main() {
    let path = Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/coordinator_crash.toml"
    ));
    let scenario = Scenario::load(path).unwrap();
    let (report, trace) = sim::run(&scenario, None, true).unwrap();
    let trace = trace.unwrap();

    for event in &trace {
        match event {
            Event::Crash { t, src } => {
                println!("{:>8.1} ms  {src} crashes", *t as f64 / 1000.0)
            }
            Event::Suspect { t, src } => {
                println!("{:>8.1} ms  {src} suspected by the failure detectors", *t as f64 / 1000.0)
            }
            Event::Recovery { t, src, id, ballot, branch } => println!(
                "{:>8.1} ms  {src} recovery of {id} at ballot {ballot}: {branch}",
                *t as f64 / 1000.0
            ),
            _ => {}
        }
    }
    println!();
    println!(
        "submitted {} | returned {} | recoveries {}",
        report.commands.submitted, report.commands.returned, report.recoveries
    );
    for (name, verdict) in &report.checkers {
        if verdict.status != "pass" {
            println!("{name}: {} {:?}", verdict.status, verdict.details);
        }
    }
    println!(
        "checkers (including liveness at the survivors): {}",
        if report.all_checks_passed { "all pass" } else { "VIOLATIONS" }
    );
}
