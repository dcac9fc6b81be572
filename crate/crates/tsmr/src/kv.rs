//! The deterministic keyed state machine commands are executed against, one
//! instance per (process, partition).

use crate::core::{Command, Key, PartitionId};
use std::collections::BTreeMap;

/// Operation tag, first payload byte.
const OP_PUT: u8 = 0;
const OP_GET: u8 = 1;

/// Encodes a put of `value` under every key the command accesses.
pub fn encode_put(value: &[u8]) -> Vec<u8> {
    let mut payload = Vec::with_capacity(1 + value.len());
    payload.push(OP_PUT);
    payload.extend_from_slice(value);
    payload
}

/// Encodes a read of every key the command accesses.
pub fn encode_get() -> Vec<u8> {
    vec![OP_GET]
}

/// Keyed byte-string store for one partition. Mutated only through
/// [`KvState::exec_apply`], in the execution order decided by the protocol,
/// so replicas that executed equal command sequences hold equal state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvState {
    partition: PartitionId,
    entries: BTreeMap<Key, Vec<u8>>,
}

impl KvState {
    pub fn new(partition: PartitionId) -> Self {
        Self { partition, entries: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: Key) -> &[u8] {
        self.entries.get(&key).map_or(&[], Vec::as_slice)
    }

    /// Applies `cmd` to this partition's slice of the state and returns the
    /// output bytes: per accessed key in ascending order, the previous value
    /// for a put or the current value for a get, length-prefixed. Missing
    /// keys read as empty.
    pub fn exec_apply(&mut self, cmd: &Command) -> Vec<u8> {
        let keys = cmd
            .accesses
            .get(&self.partition)
            .expect("command accesses this partition");
        let (op, value) = match cmd.payload.split_first() {
            Some((&OP_GET, _)) => (OP_GET, &[][..]),
            Some((&OP_PUT, value)) => (OP_PUT, value),
            // treat an empty or unknown payload as a put of nothing
            _ => (OP_PUT, &[][..]),
        };
        let mut output = Vec::new();
        for &key in keys {
            let current: &[u8] = match op {
                OP_PUT => {
                    let previous = self.entries.insert(key, value.to_vec());
                    output.extend_from_slice(&(previous.as_deref().unwrap_or(&[]).len() as u32).to_le_bytes());
                    output.extend_from_slice(previous.as_deref().unwrap_or(&[]));
                    continue;
                }
                _ => self.get(key),
            };
            output.extend_from_slice(&(current.len() as u32).to_le_bytes());
            output.extend_from_slice(current);
        }
        output
    }
}
