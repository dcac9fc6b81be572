//! Client-side command generation: closed-loop clients with conflict-rate or
//! zipfian key choice, plus the open-loop schedules.

use crate::core::{Key, PartitionId, SiteId};
use crate::kv;
use crate::scenario::{Scenario, WorkloadSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Zipf};
use std::collections::{BTreeMap, BTreeSet};

/// Maps a key to its partition by range sharding over the keyspace.
pub fn partition_of(key: Key, keyspace: u64, partitions: u16) -> PartitionId {
    debug_assert!(keyspace > 0);
    let p = (key.min(keyspace - 1) as u128 * partitions as u128 / keyspace as u128) as u16;
    p.min(partitions - 1)
}

/// One closed-loop client: a single outstanding command at a time.
#[derive(Debug)]
pub struct Client {
    pub site: SiteId,
    rng: ChaCha12Rng,
    /// Key owned by this client under the conflict workload.
    unique_key: Key,
    pub commands_left: Option<u64>,
    pub done: bool,
    pub waiting: bool,
}

#[derive(Debug)]
enum KeyGen {
    Conflict { rate: f64, keyspace: u64 },
    Zipf { dist: Zipf<f64>, keyspace: u64, keys_per_command: u8 },
}

/// The closed-loop side of a workload; open-loop schedules are expanded into
/// events up front by the runner.
#[derive(Debug)]
pub struct ClosedLoop {
    pub clients: Vec<Client>,
    keygen: KeyGen,
    payload: Vec<u8>,
    /// Stop submitting at this simulated time, if set.
    pub submit_window_us: Option<u64>,
}

impl ClosedLoop {
    /// Builds the clients for a scenario, or `None` for open-loop workloads.
    /// `seed` is the effective run seed (a CLI override wins over the file).
    pub fn build(scenario: &Scenario, seed: u64) -> Option<Self> {
        match &scenario.workload {
            WorkloadSpec::Conflict {
                clients_per_site,
                conflict_rate,
                commands_per_client,
                submit_window_ms,
                payload_size,
            } => {
                let sites = scenario.r() as u16;
                let total = *clients_per_site as u64 * sites as u64;
                let keyspace = (1 + total).max(1);
                let clients =
                    make_clients(sites, *clients_per_site, *commands_per_client, seed);
                Some(Self {
                    clients,
                    keygen: KeyGen::Conflict { rate: *conflict_rate, keyspace },
                    payload: kv::encode_put(&vec![0u8; *payload_size]),
                    submit_window_us: submit_window_ms.map(|ms| ms * 1_000),
                })
            }
            WorkloadSpec::Zipf {
                clients_per_site,
                keys,
                exponent,
                keys_per_command,
                commands_per_client,
                payload_size,
            } => {
                let sites = scenario.r() as u16;
                let clients =
                    make_clients(sites, *clients_per_site, Some(*commands_per_client), seed);
                let dist = Zipf::new(*keys as f64, *exponent).expect("validated exponent");
                Some(Self {
                    clients,
                    keygen: KeyGen::Zipf {
                        dist,
                        keyspace: *keys,
                        keys_per_command: *keys_per_command,
                    },
                    payload: kv::encode_put(&vec![0u8; *payload_size]),
                    submit_window_us: None,
                })
            }
            WorkloadSpec::RoundRobin { .. } | WorkloadSpec::Script { .. } => None,
        }
    }

    pub fn keyspace(&self) -> u64 {
        match &self.keygen {
            KeyGen::Conflict { keyspace, .. } | KeyGen::Zipf { keyspace, .. } => *keyspace,
        }
    }

    /// Next command keys for `client`, grouped later by partition.
    pub fn next_keys(&mut self, client: usize) -> Vec<Key> {
        let c = &mut self.clients[client];
        match &self.keygen {
            KeyGen::Conflict { rate, .. } => {
                let key = if c.rng.random::<f64>() < *rate { 0 } else { c.unique_key };
                vec![key]
            }
            KeyGen::Zipf { dist, keys_per_command, .. } => {
                let mut keys = BTreeSet::new();
                for _ in 0..*keys_per_command {
                    let sample = dist.sample(&mut c.rng);
                    keys.insert(sample as Key - 1);
                }
                keys.into_iter().collect()
            }
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        self.payload.clone()
    }

    /// Groups keys into the per-partition access map.
    pub fn accesses(
        &self,
        keys: &[Key],
        partitions: u16,
    ) -> BTreeMap<PartitionId, BTreeSet<Key>> {
        group_keys(keys, self.keyspace(), partitions)
    }
}

pub fn group_keys(
    keys: &[Key],
    keyspace: u64,
    partitions: u16,
) -> BTreeMap<PartitionId, BTreeSet<Key>> {
    let mut accesses: BTreeMap<PartitionId, BTreeSet<Key>> = BTreeMap::new();
    for &key in keys {
        accesses.entry(partition_of(key, keyspace, partitions)).or_default().insert(key);
    }
    accesses
}

fn make_clients(
    sites: u16,
    per_site: u32,
    commands_per_client: Option<u64>,
    seed: u64,
) -> Vec<Client> {
    let mut clients = Vec::new();
    for site in 0..sites {
        for k in 0..per_site {
            let index = clients.len() as u64;
            // client keys interleave across sites so that range sharding
            // spreads every site evenly over the partitions
            let unique_key = 1 + k as u64 * sites as u64 + site as u64;
            clients.push(Client {
                site,
                rng: ChaCha12Rng::seed_from_u64(
                    seed ^ (index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                ),
                unique_key,
                commands_left: commands_per_client,
                done: false,
                waiting: false,
            });
        }
    }
    clients
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn conflict_scenario(rate: f64) -> Scenario {
        Scenario::parse(&format!(
            r#"
name = "w"
seed = 7
horizon_ms = 1000

[topology]
sites = ["a", "b", "c"]
rtt_ms = [[0, 10, 10], [10, 0, 10], [10, 10, 0]]

[protocol]
f = 1

[workload]
mode = "conflict"
clients_per_site = 2
conflict_rate = {rate}
commands_per_client = 5
"#
        ))
        .unwrap()
    }

    #[test]
    fn conflict_rate_one_always_key_zero() {
        let mut w = ClosedLoop::build(&conflict_scenario(1.0), 7).unwrap();
        for client in 0..w.clients.len() {
            for _ in 0..20 {
                assert_eq!(w.next_keys(client), vec![0]);
            }
        }
    }

    #[test]
    fn conflict_rate_zero_unique_per_client() {
        let mut w = ClosedLoop::build(&conflict_scenario(0.0), 7).unwrap();
        let mut seen = BTreeSet::new();
        for client in 0..w.clients.len() {
            let keys = w.next_keys(client);
            assert_ne!(keys, vec![0]);
            assert!(seen.insert(keys[0]), "client keys overlap");
        }
    }

    #[test]
    fn conflict_rate_concentration() {
        // binomial: over 10^6 draws the key-0 fraction is within 0.005
        let mut w = ClosedLoop::build(&conflict_scenario(0.02), 7).unwrap();
        let draws = 1_000_000u64;
        let mut zeros = 0u64;
        for i in 0..draws {
            let client = (i % 6) as usize;
            if w.next_keys(client) == vec![0] {
                zeros += 1;
            }
        }
        let fraction = zeros as f64 / draws as f64;
        assert!((fraction - 0.02).abs() < 0.005, "fraction {fraction}");
    }

    #[test]
    fn partition_ranges_cover_keyspace() {
        let keyspace = 100;
        let partitions = 7;
        let mut last = 0;
        for key in 0..keyspace {
            let p = partition_of(key, keyspace, partitions);
            assert!(p >= last, "range sharding is monotone");
            assert!(p < partitions);
            last = p;
        }
        assert_eq!(partition_of(0, keyspace, partitions), 0);
        assert_eq!(partition_of(keyspace - 1, keyspace, partitions), partitions - 1);
    }

    #[test]
    fn zipf_two_keys_dedupe() {
        let body = r#"
name = "z"
seed = 3
horizon_ms = 1000

[topology]
sites = ["a", "b", "c"]
rtt_ms = [[0, 10, 10], [10, 0, 10], [10, 10, 0]]

[protocol]
f = 1
partitions = 3

[workload]
mode = "zipf"
clients_per_site = 1
keys = 1000
exponent = 0.7
keys_per_command = 2
commands_per_client = 5
"#;
        let scenario = Scenario::parse(body).unwrap();
        let mut w = ClosedLoop::build(&scenario, 3).unwrap();
        for _ in 0..100 {
            let keys = w.next_keys(0);
            assert!(!keys.is_empty() && keys.len() <= 2);
            let accesses = w.accesses(&keys, 3);
            assert!(!accesses.is_empty() && accesses.len() <= 2);
            for (p, ks) in accesses {
                for k in ks {
                    assert_eq!(partition_of(k, 1000, 3), p);
                }
            }
        }
    }
}
