//! The per-(process, partition) commit state machine: timestamp proposals,
//! the fast-path decision, and the flexible-quorum slow path. Execution and
//! recovery extend the same machine in their own modules.

mod clock;
mod msg;
mod process;
mod record;

pub use clock::{OwnPromise, PartitionClock, PromiseDelta};
pub use msg::{Message, PromiseBundle};
pub use process::{Effect, Process, RecoveryEvent, SimTime, SubmitError};
pub use record::{CommandRecord, ConsensusTracker, ProposeTracker, RecAckInfo, RecTracker};
