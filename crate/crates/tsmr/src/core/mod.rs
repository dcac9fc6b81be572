//! Domain types shared by every protocol module: identifiers and their
//! ordering conventions, command payloads, static configuration and
//! fast-quorum selection.

mod command;
mod config;
mod id;
mod phase;
mod quorum;

pub use command::{Command, Key};
pub use config::{Config, ConfigError};
pub use id::{id_order, Ballot, CommandId, IdSource, PartitionId, ProcessId, SiteId, Timestamp};
pub use phase::Phase;
pub use quorum::{fast_quorums, FastQuorumMap, QuorumError, RttMatrix};
