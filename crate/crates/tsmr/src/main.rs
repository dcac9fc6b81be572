//! Thin command-line front end: run a scenario, sweep seeds, or re-check a
//! recorded trace. Set `RUST_LOG` for verbosity.

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tsmr::scenario::Scenario;
use tsmr::sim;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "tsmr", about = "timestamp-stability replication simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write report.json (exit 3 on checker violation).
    Run {
        scenario: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write trace.jsonl next to the report.
        #[arg(long)]
        trace: bool,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one scenario across a seed range (half-open, e.g. 0..100).
    Sweep {
        scenario: PathBuf,
        /// Seed range `A..B`.
        #[arg(long)]
        seeds: String,
        /// Output directory for sweep.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-run the checkers over a recorded trace.jsonl.
    Check { trace: PathBuf },
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().command {
        Cmd::Run { scenario, seed, trace, out } => run_cmd(&scenario, seed, trace, &out),
        Cmd::Sweep { scenario, seeds, out } => sweep_cmd(&scenario, &seeds, &out),
        Cmd::Check { trace } => check_cmd(&trace),
    }
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    Scenario::load(path).map_err(|err| {
        eprintln!("error: {err}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run_cmd(path: &Path, seed: Option<u64>, trace: bool, out: &Path) -> ExitCode {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let (report, events) = match sim::run(&scenario, seed, trace) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(err) = std::fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {err}", out.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let report_path = out.join("report.json");
    if std::fs::write(&report_path, report.to_json()).is_err() {
        eprintln!("error: cannot write {}", report_path.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let mut trace_path = None;
    if let Some(events) = events {
        let path = out.join("trace.jsonl");
        let body: String = events.iter().map(|e| e.to_json_line()).collect();
        if std::fs::write(&path, body).is_err() {
            eprintln!("error: cannot write {}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
        trace_path = Some(path);
    }
    for (name, verdict) in &report.checkers {
        println!("{name}: {}", verdict.status);
        for detail in &verdict.details {
            println!("  {detail}");
        }
    }
    println!(
        "{}: seed {} | {} commands | fast-path {:.1}% | mean e2e {:.1} ms | report {}",
        report.scenario,
        report.seed,
        report.commands.returned,
        report.fast_path_ratio * 100.0,
        report.latency_ms.execute.mean,
        report_path.display(),
    );
    if !report.all_checks_passed {
        if let Some(path) = trace_path {
            eprintln!("checker violation; replay with: tsmr check {}", path.display());
        } else {
            eprintln!(
                "checker violation; re-run with --trace for a replayable trace: {}",
                report_path.display()
            );
        }
        return ExitCode::from(EXIT_VIOLATION);
    }
    ExitCode::SUCCESS
}

fn sweep_cmd(path: &Path, seeds: &str, out: &Path) -> ExitCode {
    let scenario = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let Some((a, b)) = seeds.split_once("..") else {
        eprintln!("error: --seeds wants a range like 0..100");
        return ExitCode::from(EXIT_CONFIG);
    };
    let (Ok(a), Ok(b)) = (a.parse::<u64>(), b.parse::<u64>()) else {
        eprintln!("error: --seeds wants numeric bounds");
        return ExitCode::from(EXIT_CONFIG);
    };
    if a >= b {
        eprintln!("error: empty seed range");
        return ExitCode::from(EXIT_CONFIG);
    }
    let reports: Vec<_> = (a..b)
        .into_par_iter()
        .map(|seed| sim::run(&scenario, Some(seed), false).map(|(report, _)| report))
        .collect();
    let mut failing = Vec::new();
    let mut summaries = Vec::new();
    for (seed, result) in (a..b).zip(reports) {
        match result {
            Ok(report) => {
                if !report.all_checks_passed {
                    failing.push((seed, report.checker_failures()));
                }
                summaries.push(report);
            }
            Err(err) => {
                eprintln!("error: seed {seed}: {err}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    let passes = summaries.len() - failing.len();
    println!("sweep {}..{}: {passes}/{} passed", a, b, summaries.len());
    for (seed, checkers) in &failing {
        println!("  seed {seed} failed: {}", checkers.join(", "));
    }
    if std::fs::create_dir_all(out).is_ok() {
        let body = serde_json::json!({
            "scenario": scenario.name,
            "seeds": format!("{a}..{b}"),
            "passes": passes,
            "failures": failing
                .iter()
                .map(|(seed, checkers)| serde_json::json!({"seed": seed, "checkers": checkers}))
                .collect::<Vec<_>>(),
            "mean_execute_ms": summaries
                .iter()
                .map(|r| r.latency_ms.execute.mean)
                .sum::<f64>()
                / summaries.len() as f64,
        });
        let path = out.join("sweep.json");
        let mut text = serde_json::to_string_pretty(&body).expect("sweep serializes");
        text.push('\n');
        let _ = std::fs::write(path, text);
    }
    if failing.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATION)
    }
}

fn check_cmd(path: &Path) -> ExitCode {
    let body = match std::fs::read_to_string(path) {
        Ok(body) => body,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let events = match sim::trace::from_jsonl(&body) {
        Ok(events) => events,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let verdicts = sim::check_events(&events);
    let mut ok = true;
    for (name, verdict) in &verdicts {
        match verdict {
            sim::Verdict::Pass => println!("{name}: pass"),
            sim::Verdict::Skipped(reason) => println!("{name}: skipped ({reason})"),
            sim::Verdict::Fail(details) => {
                ok = false;
                println!("{name}: fail");
                for d in details {
                    println!("  {d}");
                }
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VIOLATION)
    }
}
