//! Deterministic discrete-event message-passing simulator.
//!
//! Processes hold replicas of the refined BlockTree and share one oracle.
//! A successful append is applied locally, then broadcast. Every first
//! receipt is forwarded once, which gives reliable delivery among correct
//! processes when no fault is injected.

pub mod figures;
mod presets;
mod scenario;
mod sim;

pub use presets::{all_presets, preset, PRESET_NAMES};
pub use scenario::{
    Behavior, Body, ByzantineScript, ChannelKind, ChannelModel, DelayOverride, DropRule,
    Expectation, OracleConfig, OwnUpdate, ProcessSpec, Scenario, ScriptSpec, SimSpec,
    SCHEMA_VERSION,
};
pub use sim::{report, run, AuditKind, AuditRecord, ExpectationResult, Report, RunOutput};
