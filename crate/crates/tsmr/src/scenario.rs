//! Scenario files: the single input describing a run — topology, protocol
//! parameters, workload, faults and seed. TOML with a strict schema; unknown
//! fields are rejected.

use crate::core::{Config, ConfigError, Key, PartitionId, QuorumError, RttMatrix, SiteId};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Hard stop, simulated milliseconds. Runs usually quiesce earlier.
    pub horizon_ms: u64,
    pub topology: TopologySpec,
    pub protocol: ProtocolSpec,
    pub workload: WorkloadSpec,
    #[serde(default)]
    pub faults: FaultSpec,
    #[serde(default)]
    pub checks: CheckSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Site names; every site replicates every partition, so the replication
    /// factor r equals the number of sites.
    pub sites: Vec<String>,
    /// Symmetric ping matrix in milliseconds, zero diagonal.
    pub rtt_ms: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub f: usize,
    #[serde(default = "default_partitions")]
    pub partitions: u16,
    #[serde(default = "default_true")]
    pub piggyback_promises: bool,
    #[serde(default = "default_true")]
    pub enable_bump: bool,
    #[serde(default = "default_promise_period")]
    pub promise_period_ms: u64,
    /// Defaults to five times the largest RTT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recovery_timeout_ms: Option<u64>,
}

fn default_partitions() -> u16 {
    1
}
fn default_true() -> bool {
    true
}
fn default_promise_period() -> u64 {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "mode")]
pub enum WorkloadSpec {
    /// Closed-loop clients; each command touches key 0 with probability
    /// `conflict_rate` and a client-unique key otherwise.
    Conflict {
        clients_per_site: u32,
        conflict_rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        commands_per_client: Option<u64>,
        /// Alternative to a command count: submit until this instant, then
        /// drain. Commands submitted before it are measured.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        submit_window_ms: Option<u64>,
        #[serde(default = "default_payload")]
        payload_size: usize,
    },
    /// Closed-loop clients; keys drawn from a zipfian over `keys`, mapped to
    /// partitions by range. Two-key commands may span two partitions.
    Zipf {
        clients_per_site: u32,
        keys: u64,
        exponent: f64,
        #[serde(default = "default_keys_per_command")]
        keys_per_command: u8,
        commands_per_client: u64,
        #[serde(default = "default_payload")]
        payload_size: usize,
    },
    /// Open loop: `commands` all-conflicting commands submitted round-robin
    /// across sites, one every `interval_ms`.
    RoundRobin {
        commands: u64,
        interval_ms: u64,
        #[serde(default = "default_payload")]
        payload_size: usize,
    },
    /// Open loop with an explicit schedule.
    Script {
        script: Vec<ScriptEntry>,
        #[serde(default = "default_payload")]
        payload_size: usize,
    },
}

fn default_payload() -> usize {
    8
}
fn default_keys_per_command() -> u8 {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub at_ms: u64,
    pub site: SiteId,
    pub keys: Vec<Key>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    /// Scheduled crashes.
    #[serde(default)]
    pub crashes: Vec<CrashSpec>,
    /// Additionally crash up to this many random replicas per partition, at
    /// random times in the first half of the horizon.
    #[serde(default)]
    pub random_crashes_per_partition: usize,
    /// Before GST every message may be delayed by up to this much extra,
    /// which also reorders deliveries. 0 disables.
    #[serde(default)]
    pub reorder_extra_ms: u64,
    /// Global stabilization time; after it no extra delay is injected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gst_ms: Option<u64>,
    /// Uniform per-message jitter, applied throughout the run. 0 keeps
    /// delivery deterministic at exactly half the ping.
    #[serde(default)]
    pub jitter_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrashSpec {
    pub at_ms: u64,
    pub site: SiteId,
    pub partition: PartitionId,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Enforce the liveness checker (requires <= f crashes and timely
    /// delivery after GST).
    #[serde(default)]
    pub liveness: bool,
    /// Checker self-test: corrupt the run so a specific checker must fire.
    /// Supported: "property1".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] QuorumError),
    #[error("validation: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let body = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&body)
    }

    pub fn parse(body: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(body)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn r(&self) -> usize {
        self.topology.sites.len()
    }

    pub fn config(&self) -> Config {
        Config {
            r: self.r(),
            f: self.protocol.f,
            partitions: self.protocol.partitions,
            piggyback_promises: self.protocol.piggyback_promises,
            enable_bump: self.protocol.enable_bump,
            promise_period_ms: self.protocol.promise_period_ms,
            recovery_timeout_ms: self.protocol.recovery_timeout_ms,
        }
    }

    pub fn rtt(&self) -> Result<RttMatrix, QuorumError> {
        RttMatrix::new(self.topology.rtt_ms.clone())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.topology.sites.len() != self.topology.rtt_ms.len() {
            return Err(ScenarioError::Invalid(
                "rtt matrix size does not match the site list".into(),
            ));
        }
        self.rtt()?;
        self.config().validate()?;
        if self.horizon_ms == 0 {
            return Err(ScenarioError::Invalid("horizon_ms must be positive".into()));
        }
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        match &self.workload {
            WorkloadSpec::Conflict {
                conflict_rate,
                clients_per_site,
                commands_per_client,
                submit_window_ms,
                ..
            } => {
                if !(0.0..=1.0).contains(conflict_rate) {
                    return invalid(format!("conflict_rate {conflict_rate} outside [0, 1]"));
                }
                if *clients_per_site == 0 && commands_per_client.is_some() {
                    return invalid("conflict workload with zero clients".into());
                }
                if commands_per_client.is_none() && submit_window_ms.is_none() {
                    return invalid(
                        "conflict workload needs commands_per_client or submit_window_ms".into(),
                    );
                }
            }
            WorkloadSpec::Zipf { keys, exponent, keys_per_command, .. } => {
                if *keys == 0 {
                    return invalid("zipf workload needs a non-empty keyspace".into());
                }
                if *exponent <= 0.0 {
                    return invalid("zipf exponent must be positive".into());
                }
                if !matches!(keys_per_command, 1 | 2) {
                    return invalid("keys_per_command must be 1 or 2".into());
                }
            }
            WorkloadSpec::RoundRobin { commands, interval_ms, .. } => {
                if *commands == 0 || *interval_ms == 0 {
                    return invalid("round-robin workload needs commands and interval".into());
                }
            }
            WorkloadSpec::Script { script, .. } => {
                for entry in script {
                    if entry.site as usize >= self.r() {
                        return invalid(format!("script entry at unknown site {}", entry.site));
                    }
                    if entry.keys.is_empty() {
                        return invalid("script entry without keys".into());
                    }
                }
            }
        }
        for crash in &self.faults.crashes {
            if crash.site as usize >= self.r() || crash.partition >= self.protocol.partitions {
                return invalid(format!(
                    "crash of unknown process s{}p{}",
                    crash.site, crash.partition
                ));
            }
        }
        if let Some(inject) = &self.checks.inject {
            if inject != "property1" {
                return invalid(format!("unknown inject mode {inject}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
name = "minimal"
seed = 1
horizon_ms = 10000

[topology]
sites = ["a", "b", "c"]
rtt_ms = [[0, 50, 60], [50, 0, 70], [60, 70, 0]]

[protocol]
f = 1

[workload]
mode = "conflict"
clients_per_site = 1
conflict_rate = 0.5
commands_per_client = 3
"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.r(), 3);
        assert_eq!(s.protocol.partitions, 1);
        assert!(s.protocol.piggyback_promises);
    }

    #[test]
    fn rejects_unknown_fields() {
        let body = MINIMAL.replace("[protocol]\nf = 1", "[protocol]\nf = 1\nbogus = 2");
        assert!(matches!(Scenario::parse(&body), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn rejects_bad_f() {
        let body = MINIMAL.replace("f = 1", "f = 2");
        assert!(matches!(Scenario::parse(&body), Err(ScenarioError::Config(_))));
    }

    #[test]
    fn rejects_asymmetric_rtt() {
        let body = MINIMAL.replace(
            "rtt_ms = [[0, 50, 60], [50, 0, 70], [60, 70, 0]]",
            "rtt_ms = [[0, 50, 60], [51, 0, 70], [60, 70, 0]]",
        );
        assert!(matches!(Scenario::parse(&body), Err(ScenarioError::Topology(_))));
    }

    #[test]
    fn rejects_bad_conflict_rate() {
        let body = MINIMAL.replace("conflict_rate = 0.5", "conflict_rate = 1.5");
        assert!(matches!(Scenario::parse(&body), Err(ScenarioError::Invalid(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::parse(MINIMAL).unwrap();
        let s2 = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(s.name, s2.name);
        assert_eq!(s.topology.rtt_ms, s2.topology.rtt_ms);
    }
}
