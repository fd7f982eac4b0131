//! Wait-free shared-memory reductions run under a deterministic scheduler.

mod reductions;
mod registers;
mod schedule;

pub use reductions::{
    cas_via_ct, ct_via_snapshot, propose, CasCaller, CasViaCtCaller, CtLab, ProposeOutcome,
    Proposer, SnapshotBank, SnapshotCaller,
};
pub use registers::{RegisterOp, RegisterSpace};
pub use schedule::{interleavings, run_random, run_schedule, CrashSchedule, Machine, Run};
