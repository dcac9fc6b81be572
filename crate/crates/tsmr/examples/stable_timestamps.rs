//! How the stability watermark moves as promises arrive.
//!
//! Three replicas A, B, C. Three promise sets land in a process's table in
//! every combination; the stable timestamp is the largest value covered
//! contiguously by a majority. A command may only execute once its
//! timestamp is at or below the watermark.
//!
//! Run with: cargo run --example stable_timestamps

use tsmr::core::ProcessId;
use tsmr::execution::PromiseTable;

fn main() {
    let a = ProcessId::new(0, 0);
    let b = ProcessId::new(0, 1);
    let c = ProcessId::new(0, 2);
    let green = ("green", vec![(a, 1), (c, 3)]);
    let red = ("red", vec![(b, 1), (b, 2), (b, 3)]);
    let blue = ("blue", vec![(a, 2), (c, 1), (c, 2)]);

    println!("promise sets over replicas A, B, C:");
    for (name, set) in [&green, &red, &blue] {
        let rendered: Vec<String> = set
            .iter()
            .map(|(p, ts)| format!("<{}, {ts}>", ["A", "B", "C"][p.site as usize]))
            .collect();
        println!("  {name:<6} {}", rendered.join(" "));
    }
    println!();

    type PromiseSet<'a> = &'a (&'a str, Vec<(ProcessId, u64)>);
    let combos: Vec<Vec<PromiseSet>> = vec![
        vec![&green],
        vec![&red],
        vec![&blue],
        vec![&green, &red],
        vec![&green, &blue],
        vec![&red, &blue],
        vec![&green, &red, &blue],
    ];
    for combo in combos {
        let mut table = PromiseTable::new([a, b, c]);
        for (_, set) in &combo {
            for &(peer, ts) in set {
                table.insert_admissible(peer, ts);
            }
        }
        let names: Vec<&str> = combo.iter().map(|(n, _)| *n).collect();
        let hcv: Vec<u64> = [a, b, c].iter().map(|&p| table.highest_contiguous(p)).collect();
        println!(
            "{:<20} highest contiguous per replica {:?} -> stable {}",
            names.join(" + "),
            hcv,
            table.stable_timestamp()
        );
    }
    println!();
    println!("A single set never covers a majority contiguously, so nothing is");
    println!("stable; red + blue covers 1..=2 at B and C, so timestamp 2 is.");
}
