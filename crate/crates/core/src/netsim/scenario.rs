use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::checkers::{Criterion, Status};
use crate::error::{Error, Result};
use crate::history::{Event, History};
use crate::ids::{BlockId, ProcessId};
use crate::oracle::{Capacity, Merit};
use crate::refinement::DEFAULT_MAX_GRANT_ATTEMPTS;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Expectation {
    Pass,
    Fail,
    Inconclusive,
    NotPass,
}

impl Expectation {
    pub fn met_by(self, status: Status) -> bool {
        match self {
            Expectation::Pass => status == Status::Pass,
            Expectation::Fail => status == Status::Fail,
            Expectation::Inconclusive => status == Status::Inconclusive,
            Expectation::NotPass => status != Status::Pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub declared_complete: bool,
    #[serde(default = "default_window")]
    pub window: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<Criterion, Expectation>,
    #[serde(flatten)]
    pub body: Body,
}

fn default_window() -> u32 {
    crate::checkers::DEFAULT_WINDOW
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Body {
    Simulated(SimSpec),
    Script(ScriptSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub processes: Vec<ProcessSpec>,
    pub channel: ChannelModel,
    pub oracle: OracleConfig,
    pub duration: u64,
    /// No append is attempted after this tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quiesce_after: Option<u64>,
    pub read_interval: u64,
    #[serde(default = "default_attempts")]
    pub max_grant_attempts: u64,
}

fn default_attempts() -> u64 {
    DEFAULT_MAX_GRANT_ATTEMPTS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub capacity: Capacity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub id: ProcessId,
    pub merit: Merit,
    /// Ticks between append attempts; absent means the process never appends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_append: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_read: Option<u64>,
    #[serde(default, skip_serializing_if = "Behavior::is_correct")]
    pub behavior: Behavior,
    #[serde(default, skip_serializing_if = "OwnUpdate::is_immediate")]
    pub own_update: OwnUpdate,
}

impl ProcessSpec {
    pub fn new(id: impl Into<ProcessId>, merit: Merit) -> Self {
        ProcessSpec {
            id: id.into(),
            merit,
            block_interval: None,
            first_append: None,
            first_read: None,
            behavior: Behavior::Correct,
            own_update: OwnUpdate::Immediate,
        }
    }

    pub fn appending(mut self, every: u64, first: Option<u64>) -> Self {
        self.block_interval = Some(every);
        self.first_append = first;
        self
    }

    pub fn first_read(mut self, tick: u64) -> Self {
        self.first_read = Some(tick);
        self
    }

    pub fn own_update(mut self, mode: OwnUpdate) -> Self {
        self.own_update = mode;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    #[default]
    Correct,
    Byzantine(ByzantineScript),
}

impl Behavior {
    pub fn is_correct(&self) -> bool {
        matches!(self, Behavior::Correct)
    }
}

/// Deviations a Byzantine process may take. It cannot forge tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ByzantineScript {
    #[serde(default)]
    pub withhold: bool,
    #[serde(default)]
    pub extra_delay: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub send_only_to: Option<Vec<ProcessId>>,
}

/// When an appender applies its own block: right after the append, or only
/// once its own broadcast comes back.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OwnUpdate {
    #[default]
    Immediate,
    OnSelfDelivery,
}

impl OwnUpdate {
    pub fn is_immediate(&self) -> bool {
        *self == OwnUpdate::Immediate
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    #[serde(flatten)]
    pub kind: ChannelKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<DropRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delay_overrides: Vec<DelayOverride>,
    #[serde(default)]
    pub duplication: bool,
    /// Forward every first receipt once (echo broadcast).
    #[serde(default = "yes")]
    pub relay: bool,
}

fn yes() -> bool {
    true
}

impl ChannelModel {
    pub fn new(kind: ChannelKind) -> Self {
        ChannelModel {
            kind,
            drops: Vec::new(),
            delay_overrides: Vec::new(),
            duplication: false,
            relay: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelKind {
    Asynchronous,
    Synchronous { delta: u64 },
    WeaklySynchronous { tau: u64, delta: u64 },
}

/// Drop every message to `to`, optionally only from `from` and only carrying
/// `block`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<ProcessId>,
    pub to: ProcessId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockId>,
}

impl DropRule {
    pub fn matches(&self, from: &ProcessId, to: &ProcessId, block: &BlockId) -> bool {
        &self.to == to
            && self.from.as_ref().is_none_or(|f| f == from)
            && self.block.as_ref().is_none_or(|b| b == block)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayOverride {
    pub from: ProcessId,
    pub to: ProcessId,
    pub ticks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptSpec {
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub processes: Vec<ProcessId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<Vec<ProcessId>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenarios serialize");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scenario {:?}: {m}", self.name)));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        match &self.body {
            Body::Script(script) => {
                let h = History::record(script.events.clone())?;
                let known: BTreeSet<&ProcessId> =
                    h.processes().iter().chain(&script.processes).collect();
                if let Some(p) = script.correct.iter().flatten().find(|p| !known.contains(p)) {
                    return bad(format!("correct process {p} never appears"));
                }
                Ok(())
            }
            Body::Simulated(sim) => {
                if sim.processes.is_empty() {
                    return bad("no processes".into());
                }
                let ids: BTreeSet<&ProcessId> = sim.processes.iter().map(|p| &p.id).collect();
                if ids.len() != sim.processes.len() {
                    return bad("duplicate process ids".into());
                }
                if sim.duration == 0 || sim.read_interval < 2 {
                    return bad("duration must be positive and read_interval at least 2".into());
                }
                if sim.max_grant_attempts == 0 {
                    return bad("max_grant_attempts must be positive".into());
                }
                match sim.channel.kind {
                    ChannelKind::Synchronous { delta }
                    | ChannelKind::WeaklySynchronous { delta, .. }
                        if delta == 0 =>
                    {
                        return bad("delta must be at least 1".into());
                    }
                    _ => {}
                }
                for p in &sim.processes {
                    if p.block_interval == Some(0) {
                        return bad(format!("{}: block_interval must be positive", p.id));
                    }
                    if let Behavior::Byzantine(script) = &p.behavior {
                        if let Some(q) = script
                            .send_only_to
                            .iter()
                            .flatten()
                            .find(|q| !ids.contains(q))
                        {
                            return bad(format!("{}: unknown target {q}", p.id));
                        }
                    }
                }
                let mentioned = sim
                    .channel
                    .drops
                    .iter()
                    .flat_map(|d| d.from.iter().chain([&d.to]))
                    .chain(
                        sim.channel
                            .delay_overrides
                            .iter()
                            .flat_map(|o| [&o.from, &o.to]),
                    );
                for p in mentioned {
                    if !ids.contains(p) {
                        return bad(format!("channel rule names unknown process {p}"));
                    }
                }
                if sim.channel.delay_overrides.iter().any(|o| o.ticks == 0) {
                    return bad("override delays must be positive".into());
                }
                Ok(())
            }
        }
    }

    pub fn sim(&self) -> Option<&SimSpec> {
        match &self.body {
            Body::Simulated(s) => Some(s),
            Body::Script(_) => None,
        }
    }

    pub fn sim_mut(&mut self) -> Option<&mut SimSpec> {
        match &mut self.body {
            Body::Simulated(s) => Some(s),
            Body::Script(_) => None,
        }
    }
}
