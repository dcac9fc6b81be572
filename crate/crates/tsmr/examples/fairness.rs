//! Per-site latency shape over the five-site wide-area topology with 512
//! closed-loop clients per site at a 2% conflict rate.
//!
//! Commit latency per site is one ping to the farthest fast-quorum member.
//! End-to-end latency adds the stability wait, which couples sites: a
//! site's watermark waits for lower-timestamped remote commands to commit
//! locally. The partitions knob tunes that coupling — sweep it to see the
//! frontier between "low mean, high spread" (decoupled) and "flat but
//! slow" (fully coupled).
//!
//! Run with: cargo run --release --example fairness [f] [partitions,...]

use std::path::Path;
use tsmr::scenario::Scenario;
use tsmr::sim;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let f: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let partition_counts: Vec<u16> = args
        .get(2)
        .map(|s| s.split(',').map(|x| x.parse().unwrap()).collect())
        .unwrap_or_else(|| vec![1792]);

    let path = Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/scenarios/fairness_5sites_f1.toml"
    ));
    for partitions in partition_counts {
        let mut scenario = Scenario::load(path).unwrap();
        scenario.protocol.f = f;
        scenario.protocol.partitions = partitions;
        let started = std::time::Instant::now();
        let (report, _) = sim::run(&scenario, None, false).unwrap();
        println!(
            "f={f} partitions={partitions}: {} commands in {:.1}s wall, checkers {}",
            report.commands.returned,
            started.elapsed().as_secs_f64(),
            if report.all_checks_passed { "pass" } else { "FAIL" }
        );
        println!("  {:<14} {:>10} {:>10}", "site", "commit ms", "e2e ms");
        let mut means = Vec::new();
        for (site, block) in &report.per_site_ms {
            println!(
                "  {site:<14} {:>10.1} {:>10.1}",
                block.commit.mean, block.execute.mean
            );
            means.push(block.execute.mean);
        }
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let ratio = means.iter().cloned().fold(f64::MIN, f64::max)
            / means.iter().cloned().fold(f64::MAX, f64::min);
        println!("  mean across sites {grand:.1} ms | site max/min {ratio:.2}\n");
    }
}
