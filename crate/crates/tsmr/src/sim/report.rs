//! Run metrics and the report.json schema.

use super::checker::Verdict;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Latency summary in simulated milliseconds; percentiles are nearest-rank
/// over the sorted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub p999: f64,
    pub max: f64,
}

impl LatencyStats {
    /// Builds stats from microsecond samples.
    pub fn from_us(mut samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        samples.sort_unstable();
        let n = samples.len();
        let rank = |q: f64| -> f64 {
            let idx = (q * n as f64).ceil() as usize;
            samples[idx.clamp(1, n) - 1] as f64 / 1000.0
        };
        let sum: u64 = samples.iter().sum();
        Self {
            samples: n,
            mean: sum as f64 / n as f64 / 1000.0,
            p50: rank(0.50),
            p95: rank(0.95),
            p99: rank(0.99),
            p999: rank(0.999),
            max: *samples.last().expect("non-empty") as f64 / 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LatencyBlock {
    /// Submit to local commit at the submitter.
    pub commit: LatencyStats,
    /// Submit to aggregated return (end-to-end, what a client observes).
    pub execute: LatencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckerVerdict {
    pub status: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl From<&Verdict> for CheckerVerdict {
    fn from(v: &Verdict) -> Self {
        match v {
            Verdict::Pass => Self { status: "pass".into(), details: Vec::new() },
            Verdict::Fail(details) => {
                Self { status: "fail".into(), details: details.clone() }
            }
            Verdict::Skipped(reason) => {
                Self { status: "skipped".into(), details: vec![reason.clone()] }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CommandCounts {
    pub submitted: u64,
    pub returned: u64,
    pub exec_upcalls: u64,
}

/// Everything a run reports. Serialized as report.json (schema version 1);
/// identical scenario and seed produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub r: usize,
    pub f: usize,
    pub partitions: u16,
    pub commands: CommandCounts,
    /// Per-partition commit decisions taken on the fast path.
    pub fast_paths: u64,
    pub slow_paths: u64,
    pub recoveries: u64,
    pub fast_path_ratio: f64,
    pub virtual_ms: u64,
    pub events: u64,
    pub latency_ms: LatencyBlock,
    pub per_site_ms: BTreeMap<String, LatencyBlock>,
    pub checkers: BTreeMap<String, CheckerVerdict>,
    pub all_checks_passed: bool,
    pub trace_hash: String,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut body = serde_json::to_string_pretty(self).expect("report serializes");
        body.push('\n');
        body
    }

    pub fn checker_failures(&self) -> Vec<String> {
        self.checkers
            .iter()
            .filter(|(_, v)| v.status == "fail")
            .map(|(name, _)| name.clone())
            .collect()
    }
}
