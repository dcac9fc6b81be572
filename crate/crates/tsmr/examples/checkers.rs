//! The correctness checkers at work: a clean run passes every monitor; a
//! run corrupted with a contradictory commit decision is flagged, and the
//! written trace replays to the same verdicts.
//!
//! Run with: cargo run --example checkers

use std::path::Path;
use tsmr::scenario::Scenario;
use tsmr::sim;

fn main() {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios"));

    let clean = Scenario::load(&dir.join("smoke.toml")).unwrap();
    let (report, trace) = sim::run(&clean, None, true).unwrap();
    println!("clean run: {} commands", report.commands.returned);
    for (name, verdict) in &report.checkers {
        println!("  {name}: {}", verdict.status);
    }

    // the same verdicts fall out of replaying the recorded trace
    let events = trace.unwrap();
    let replayed = sim::check_events(&events);
    assert!(replayed.values().all(|v| v.passed()));
    println!("replaying the {}-event trace: all pass\n", events.len());

    let bad = Scenario::load(&dir.join("checker_selftest.toml")).unwrap();
    let (report, _) = sim::run(&bad, None, false).unwrap();
    println!("corrupted run (duplicate commit decision injected):");
    for (name, verdict) in &report.checkers {
        if verdict.status == "fail" {
            println!("  {name}: {} — {}", verdict.status, verdict.details.join("; "));
        }
    }
    assert!(!report.all_checks_passed);
}
