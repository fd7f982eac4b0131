use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Behavior, Body, ChannelKind, OwnUpdate, Scenario, SimSpec};
use crate::blocktree::{Block, BlockTree};
use crate::checkers::{Checker, Status, Verdict};
use crate::error::Result;
use crate::history::{Args, Event, EventKind, History, OpKind, Returned};
use crate::ids::{BlockId, ProcessId};
use crate::oracle::OracleState;
use crate::refinement::{max_fork_count, merge_trees, AppendOutcome, RefinedLedger};
use crate::seed;

type Finished = (
    Vec<Event>,
    Vec<AuditRecord>,
    usize,
    BTreeMap<ProcessId, BlockTree>,
);

/// Oracle and channel bookkeeping that is not part of the checked history.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub tick: u64,
    pub logical_time: u64,
    pub process: ProcessId,
    pub event: AuditKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<BlockId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peer: Option<ProcessId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditKind {
    AppendAttempt,
    Grant,
    Consume,
    Concatenate,
    Reject,
    Exhausted,
    Drop,
    Undelivered,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Restricted to the events visible under the Byzantine model.
    pub history: History,
    pub audit: Vec<AuditRecord>,
    pub undelivered: usize,
    pub replicas: BTreeMap<ProcessId, BlockTree>,
}

impl RunOutput {
    pub fn max_fork_count(&self) -> usize {
        max_fork_count(&merge_trees(self.replicas.values()))
    }

    pub fn audit_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.audit {
            out.push_str(&serde_json::to_string(r).expect("audit records serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Action {
    Append(usize),
    Read(usize),
    ReadReturn(usize),
    Deliver {
        to: usize,
        from: usize,
        block: Block,
    },
}

struct Proc {
    id: ProcessId,
    ledger: RefinedLedger,
    appended: u64,
    received: BTreeSet<BlockId>,
}

struct Sim<'a> {
    spec: &'a SimSpec,
    procs: Vec<Proc>,
    oracle: OracleState,
    rng: ChaCha8Rng,
    queue: BTreeMap<(u64, u64), Action>,
    seq: u64,
    clock: u64,
    tick: u64,
    events: Vec<Event>,
    audit: Vec<AuditRecord>,
}

impl<'a> Sim<'a> {
    fn new(spec: &'a SimSpec, root_seed: u64) -> Self {
        let mut oracle = OracleState::new(spec.oracle.capacity);
        let procs = spec
            .processes
            .iter()
            .map(|p| {
                oracle.register(
                    p.id.clone(),
                    p.merit,
                    seed::derive(root_seed, p.id.as_str()),
                );
                Proc {
                    id: p.id.clone(),
                    ledger: RefinedLedger::default()
                        .with_max_grant_attempts(spec.max_grant_attempts),
                    appended: 0,
                    received: BTreeSet::new(),
                }
            })
            .collect();
        Sim {
            spec,
            procs,
            oracle,
            rng: ChaCha8Rng::seed_from_u64(seed::derive(root_seed, "channel")),
            queue: BTreeMap::new(),
            seq: 0,
            clock: 0,
            tick: 0,
            events: Vec::new(),
            audit: Vec::new(),
        }
    }

    fn schedule(&mut self, tick: u64, action: Action) {
        self.seq += 1;
        self.queue.insert((tick, self.seq), action);
    }

    fn record(
        &mut self,
        p: usize,
        kind: EventKind,
        op: OpKind,
        args: Args,
        returned: Option<Returned>,
    ) {
        self.clock += 1;
        self.events.push(Event {
            event_id: self.clock,
            kind,
            op,
            args,
            process: self.procs[p].id.clone(),
            logical_time: self.clock,
            returned,
        });
    }

    fn transfer(&mut self, p: usize, kind: EventKind, block: &Block) {
        let op = match kind {
            EventKind::Send => OpKind::Send,
            EventKind::Receive => OpKind::Receive,
            _ => OpKind::Update,
        };
        let args = Args {
            parent: block.parent.clone(),
            block: Some(block.clone()),
        };
        self.record(p, kind, op, args, None);
    }

    fn note(
        &mut self,
        p: usize,
        event: AuditKind,
        block: Option<&Block>,
        attempts: Option<u64>,
        peer: Option<usize>,
    ) {
        self.audit.push(AuditRecord {
            tick: self.tick,
            logical_time: self.clock,
            process: self.procs[p].id.clone(),
            event,
            block: block.map(|b| b.id.clone()),
            parent: block.and_then(|b| b.parent.clone()),
            attempts,
            peer: peer.map(|q| self.procs[q].id.clone()),
        });
    }

    fn behavior(&self, p: usize) -> &'a Behavior {
        &self.spec.processes[p].behavior
    }

    fn delay(&mut self, from: usize, to: usize) -> u64 {
        let (f, t) = (&self.procs[from].id, &self.procs[to].id);
        let fixed = self
            .spec
            .channel
            .delay_overrides
            .iter()
            .find(|o| &o.from == f && &o.to == t)
            .map(|o| o.ticks);
        let base = match fixed {
            Some(d) => d,
            None => match self.spec.channel.kind {
                ChannelKind::Synchronous { delta } => self.rng.gen_range(1..=delta),
                ChannelKind::Asynchronous => self.rng.gen_range(1..=self.spec.duration.max(1)),
                ChannelKind::WeaklySynchronous { tau, delta } => {
                    let bound = if self.tick < tau {
                        tau - self.tick + delta
                    } else {
                        delta
                    };
                    self.rng.gen_range(1..=bound)
                }
            },
        };
        let extra = match self.behavior(from) {
            Behavior::Byzantine(s) => s.extra_delay,
            Behavior::Correct => 0,
        };
        base + extra
    }

    /// Record one SEND and schedule a copy to every target. A relay skips
    /// itself and the block's originator.
    fn broadcast(&mut self, from: usize, block: &Block, relay: bool) {
        let targets: Vec<usize> = match self.behavior(from) {
            Behavior::Byzantine(s) if s.withhold => return,
            Behavior::Byzantine(s) => match &s.send_only_to {
                Some(only) => (0..self.procs.len())
                    .filter(|&q| only.contains(&self.procs[q].id))
                    .collect(),
                None => (0..self.procs.len()).collect(),
            },
            Behavior::Correct => (0..self.procs.len()).collect(),
        };
        let bearer = block.token.as_ref().map(|t| &t.bearer);
        let targets: Vec<usize> = targets
            .into_iter()
            .filter(|&q| !relay || (q != from && Some(&self.procs[q].id) != bearer))
            .collect();
        if targets.is_empty() {
            return;
        }
        self.transfer(from, EventKind::Send, block);
        for to in targets {
            let copies = if self.spec.channel.duplication && self.rng.gen_bool(0.25) {
                2
            } else {
                1
            };
            for _ in 0..copies {
                let d = self.delay(from, to);
                self.schedule(
                    self.tick + d,
                    Action::Deliver {
                        to,
                        from,
                        block: block.clone(),
                    },
                );
            }
        }
    }

    fn on_append(&mut self, p: usize) -> Result<()> {
        let spec = &self.spec.processes[p];
        if self.spec.quiesce_after.is_some_and(|q| self.tick > q) {
            return Ok(());
        }
        self.procs[p].appended += 1;
        let candidate = Block::new(format!("{}-{}", self.procs[p].id, self.procs[p].appended));
        let args = Args {
            parent: None,
            block: Some(candidate.clone()),
        };
        self.record(p, EventKind::Invocation, OpKind::Append, args, None);
        let caller = self.procs[p].id.clone();
        let deferred = spec.own_update == OwnUpdate::OnSelfDelivery;
        let outcome = if deferred {
            let mut scratch = self.procs[p].ledger.clone();
            scratch.refined_append(&mut self.oracle, candidate.clone(), &caller)?
        } else {
            self.procs[p]
                .ledger
                .refined_append(&mut self.oracle, candidate.clone(), &caller)?
        };
        let attempts = Some(outcome.attempts());
        self.note(
            p,
            AuditKind::AppendAttempt,
            Some(&candidate),
            attempts,
            None,
        );
        match &outcome {
            AppendOutcome::Appended { block, .. } => {
                self.note(p, AuditKind::Grant, Some(block), None, None);
                self.note(p, AuditKind::Consume, Some(block), None, None);
                self.note(p, AuditKind::Concatenate, Some(block), None, None);
            }
            AppendOutcome::Rejected { stamped, .. } => {
                self.note(p, AuditKind::Grant, Some(stamped), None, None);
                self.note(p, AuditKind::Reject, Some(stamped), None, None);
            }
            AppendOutcome::Exhausted { .. } => {
                self.note(p, AuditKind::Exhausted, Some(&candidate), attempts, None)
            }
            AppendOutcome::Invalid => {}
        }
        let ok = outcome.succeeded();
        self.record(
            p,
            EventKind::Response,
            OpKind::Append,
            Args::default(),
            Some(Returned::Bool(ok)),
        );
        if let AppendOutcome::Appended { block, .. } = outcome {
            if !deferred {
                self.transfer(p, EventKind::Update, &block);
            }
            self.broadcast(p, &block, false);
        }
        if let Some(every) = spec.block_interval {
            if self.tick + every <= self.spec.duration {
                self.schedule(self.tick + every, Action::Append(p));
            }
        }
        Ok(())
    }

    fn on_deliver(&mut self, to: usize, from: usize, block: Block) {
        let (f, t) = (&self.procs[from].id, &self.procs[to].id);
        if self
            .spec
            .channel
            .drops
            .iter()
            .any(|d| d.matches(f, t, &block.id))
        {
            self.note(to, AuditKind::Drop, Some(&block), None, Some(from));
            return;
        }
        if !self.procs[to].received.insert(block.id.clone()) {
            return;
        }
        self.transfer(to, EventKind::Receive, &block);
        for b in self.procs[to].ledger.receive(block.clone()) {
            self.transfer(to, EventKind::Update, &b);
        }
        let bearer = block.token.as_ref().map(|t| &t.bearer);
        if self.spec.channel.relay && to != from && bearer != Some(&self.procs[to].id) {
            self.broadcast(to, &block, true);
        }
    }

    fn run(mut self) -> Result<Finished> {
        let spec = self.spec;
        for (i, p) in spec.processes.iter().enumerate() {
            if let Some(every) = p.block_interval {
                self.schedule(p.first_append.unwrap_or(every), Action::Append(i));
            }
            let first_read = p.first_read.unwrap_or(1 + i as u64 % spec.read_interval);
            self.schedule(first_read, Action::Read(i));
        }
        let mut reading = vec![false; self.procs.len()];
        while let Some(entry) = self.queue.first_entry() {
            let (tick, _) = *entry.key();
            if tick > spec.duration {
                break;
            }
            let action = entry.remove();
            self.tick = tick;
            match action {
                Action::Append(p) => self.on_append(p)?,
                Action::Read(p) => {
                    if !reading[p] {
                        reading[p] = true;
                        self.record(
                            p,
                            EventKind::Invocation,
                            OpKind::Read,
                            Args::default(),
                            None,
                        );
                        self.schedule(tick + 1, Action::ReadReturn(p));
                    }
                    if tick + spec.read_interval <= spec.duration {
                        self.schedule(tick + spec.read_interval, Action::Read(p));
                    }
                }
                Action::ReadReturn(p) => {
                    reading[p] = false;
                    let chain = self.procs[p].ledger.read();
                    self.record(
                        p,
                        EventKind::Response,
                        OpKind::Read,
                        Args::default(),
                        Some(Returned::Chain(chain)),
                    );
                }
                Action::Deliver { to, from, block } => self.on_deliver(to, from, block),
            }
        }
        let leftover: Vec<Action> = std::mem::take(&mut self.queue).into_values().collect();
        let mut undelivered = 0;
        for action in leftover {
            if let Action::Deliver { to, from, block } = action {
                undelivered += 1;
                self.note(to, AuditKind::Undelivered, Some(&block), None, Some(from));
            }
        }
        let replicas = self
            .procs
            .iter()
            .map(|p| (p.id.clone(), p.ledger.tree().clone()))
            .collect();
        Ok((self.events, self.audit, undelivered, replicas))
    }
}

/// Execute a scenario. Simulated runs return the restricted history; scripts
/// are taken as written.
pub fn run(s: &Scenario) -> Result<RunOutput> {
    s.validate()?;
    match &s.body {
        Body::Script(script) => {
            let processes = script.processes.iter().cloned();
            let mut h = History::record(script.events.clone())?.with_processes(processes);
            if let Some(correct) = &script.correct {
                h = h.with_correct(correct.iter().cloned())?;
            }
            Ok(RunOutput {
                history: h.declared_complete(s.declared_complete),
                audit: Vec::new(),
                undelivered: 0,
                replicas: BTreeMap::new(),
            })
        }
        Body::Simulated(spec) => {
            let (events, audit, undelivered, replicas) = Sim::new(spec, s.seed).run()?;
            let correct = spec
                .processes
                .iter()
                .filter(|p| p.behavior.is_correct())
                .map(|p| p.id.clone());
            let history = History::record(events)?
                .with_processes(spec.processes.iter().map(|p| p.id.clone()))
                .with_correct(correct)?
                .declared_complete(s.declared_complete)
                .restricted();
            Ok(RunOutput {
                history,
                audit,
                undelivered,
                replicas,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub criterion: String,
    pub expected: super::scenario::Expectation,
    pub actual: Status,
    pub met: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub complete: bool,
    pub window: u32,
    pub events: usize,
    pub undelivered: usize,
    pub max_fork_count: usize,
    pub verdicts: Vec<Verdict>,
    pub expectations: Vec<ExpectationResult>,
    pub all_expectations_met: bool,
}

impl Report {
    pub fn verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("scenario {} (seed {})\n", self.scenario, self.seed);
        for v in &self.verdicts {
            out.push_str(&format!("  {:<22} {}\n", v.criterion, v.status));
        }
        for e in &self.expectations {
            let mark = if e.met { "ok" } else { "UNMET" };
            out.push_str(&format!(
                "  expect {} {:?}: {} [{mark}]\n",
                e.criterion, e.expected, e.actual
            ));
        }
        out
    }
}

/// Check every criterion on a run and compare against the scenario's
/// expectations.
pub fn report(s: &Scenario, out: &RunOutput) -> Result<Report> {
    let checker = Checker::with_window(s.window)?;
    let verdicts = checker.check_all(&out.history);
    let expectations: Vec<ExpectationResult> = s
        .expect
        .iter()
        .map(|(c, e)| {
            let actual = verdicts
                .iter()
                .find(|v| v.criterion == c.name())
                .map(|v| v.status)
                .expect("every criterion is checked");
            ExpectationResult {
                criterion: c.name().to_owned(),
                expected: *e,
                actual,
                met: e.met_by(actual),
            }
        })
        .collect();
    Ok(Report {
        scenario: s.name.clone(),
        seed: s.seed,
        complete: out.history.is_complete(),
        window: s.window,
        events: out.history.len(),
        undelivered: out.undelivered,
        max_fork_count: out.max_fork_count(),
        all_expectations_met: expectations.iter().all(|e| e.met),
        verdicts,
        expectations,
    })
}
