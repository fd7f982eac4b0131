//! BlockTree and token-oracle abstract data types with the machinery needed
//! to study them experimentally.
//!
//! The crate is organised bottom-up:
//!
//! - [`blocktree`] and [`policy`]: the sequential BlockTree object, chains,
//!   score and the chain selection rule.
//! - [`oracle`]: merit-indexed token tapes and the capacity-bounded
//!   consumption array (frugal with capacity `k`, or prodigal).
//! - [`refinement`]: the BlockTree whose `append` is driven by the oracle.
//! - [`history`]: concurrent histories, process / operation / program order.
//! - [`checkers`]: three-valued verdicts for the consistency criteria and the
//!   communication properties.
//! - [`shm`]: wait-free shared-memory reductions executed under a
//!   deterministic scheduler.
//! - [`netsim`]: a deterministic discrete-event message-passing simulator
//!   with canned scenarios.
//! - [`campaign`]: randomized and exhaustive property campaigns shared by the
//!   CLI and the acceptance suite.

pub mod blocktree;
pub mod campaign;
pub mod checkers;
pub mod error;
pub mod history;
pub mod ids;
pub mod netsim;
pub mod oracle;
pub mod policy;
pub mod refinement;
pub mod seed;
pub mod shm;

pub use blocktree::{is_prefix, mcps, score, Block, BlockTree, BlockTreeAdt, Blockchain};
pub use checkers::{Checker, EventualityWindow, Status, Verdict};
pub use error::{Error, Result};
pub use history::{Event, EventKind, History, OpKind};
pub use ids::{BlockId, ProcessId};
pub use oracle::{Capacity, Merit, OracleState, Tape, Token};
pub use policy::SelectionPolicy;
pub use refinement::{fork_count, AppendOutcome, RefinedLedger};
