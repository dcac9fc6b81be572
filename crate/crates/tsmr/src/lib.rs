//! Leaderless partial state-machine replication ordered by scalar timestamp
//! stability, embedded in a deterministic discrete-event simulator.
//!
//! Each partition of the service state is replicated at `r` processes, of
//! which `f` may crash. Commands receive a timestamp from a fast quorum of
//! `floor(r/2) + f` replicas in a single round trip when enough proposals
//! agree, and fall back to single-decree flexible consensus otherwise.
//! Replicas execute a command once its timestamp is *stable*: every command
//! with a lower timestamp is already known locally. Stability is detected
//! from per-replica promises, fully decentralized — there is no leader.
//!
//! The crate ships:
//! - the protocol state machine ([`commit`], [`execution`], [`recovery`]),
//!   one instance per (process, partition), driven purely by messages;
//! - a deterministic simulator ([`sim`]) with wide-area latencies, crash and
//!   reordering injection, closed-loop clients and correctness checkers;
//! - an in-memory keyed state machine and scenario/report plumbing ([`kv`],
//!   [`scenario`]) behind the `tsmr` command-line binary.
//!
//! See the `examples/` directory for one runnable walk-through per
//! capability, starting with `fast_paths`.

pub mod commit;
pub mod core;
pub mod execution;
pub mod kv;
pub mod recovery;
pub mod scenario;
pub mod sim;

pub use commit::{Effect, Message, Process, PromiseBundle, RecoveryEvent, SimTime};
pub use core::{
    Ballot, Command, CommandId, Config, FastQuorumMap, Key, PartitionId, Phase, ProcessId,
    RttMatrix, SiteId, Timestamp,
};
pub use recovery::FdView;
pub use scenario::Scenario;
pub use sim::{RunReport, Sim};
