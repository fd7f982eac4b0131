//! Randomized and exhaustive property campaigns. Every run is reproducible
//! from `seed::nth(root, index)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blocktree::{Block, Blockchain};
use crate::checkers::{Checker, Status};
use crate::error::Result;
use crate::history::{Event, EventKind, History, OpKind, Returned};
use crate::ids::{BlockId, ProcessId};
use crate::netsim::{
    self, Behavior, Body, ByzantineScript, ChannelKind, ChannelModel, DropRule, OracleConfig,
    OwnUpdate, ProcessSpec, Scenario, SimSpec, SCHEMA_VERSION,
};
use crate::oracle::{Capacity, Merit, OracleState};
use crate::refinement::{execute_schedule, max_fork_count, Step, DEFAULT_MAX_GRANT_ATTEMPTS};
use crate::seed;
use crate::shm::{
    interleavings, run_random, run_schedule, CasCaller, CasViaCtCaller, CrashSchedule, CtLab,
    Machine, ProposeOutcome, Proposer, RegisterSpace, SnapshotBank, SnapshotCaller,
};

fn rng_for(root: u64, index: u64) -> (u64, ChaCha8Rng) {
    let s = seed::nth(root, index);
    (s, ChaCha8Rng::seed_from_u64(s))
}

fn random_merit<R: Rng>(rng: &mut R) -> Merit {
    let quarters = rng.gen_range(1..=4);
    Merit::ratio(quarters, 4).expect("quarters are valid merits")
}

fn pids(n: usize, prefix: &str) -> Vec<ProcessId> {
    (1..=n)
        .map(|i| ProcessId::new(format!("{prefix}{i}")))
        .collect()
}

// ---------------------------------------------------------------------------
// Hierarchy

/// A random simulated scenario exercising every channel kind, capacity,
/// own-update mode, drops and Byzantine scripts.
pub fn random_scenario<R: Rng>(rng: &mut R, seed: u64) -> Scenario {
    let n = rng.gen_range(2..=4);
    let ids = pids(n, "p");
    let duration = rng.gen_range(20..=60);
    let processes: Vec<ProcessSpec> = ids
        .iter()
        .map(|id| {
            let mut p = ProcessSpec::new(id.clone(), random_merit(rng));
            if rng.gen_bool(0.8) {
                p = p.appending(rng.gen_range(2..=8), Some(rng.gen_range(1..=6)));
            }
            if rng.gen_bool(0.3) {
                p = p.own_update(OwnUpdate::OnSelfDelivery);
            }
            p
        })
        .collect();
    let kind = match rng.gen_range(0..3) {
        0 => ChannelKind::Synchronous {
            delta: rng.gen_range(1..=4),
        },
        1 => ChannelKind::Asynchronous,
        _ => ChannelKind::WeaklySynchronous {
            tau: rng.gen_range(5..=duration),
            delta: rng.gen_range(1..=3),
        },
    };
    let mut channel = ChannelModel::new(kind);
    channel.duplication = rng.gen_bool(0.2);
    channel.relay = rng.gen_bool(0.9);
    if rng.gen_bool(0.2) {
        let from = ids.choose(rng).cloned();
        let to = ids.choose(rng).cloned().expect("non-empty");
        let block = rng
            .gen_bool(0.5)
            .then(|| BlockId::new(format!("{}-1", ids.choose(rng).expect("non-empty"))));
        channel.drops.push(DropRule { from, to, block });
    }
    let mut sim = SimSpec {
        processes,
        channel,
        oracle: OracleConfig {
            capacity: match rng.gen_range(0..3) {
                0 => Capacity::Bounded(1),
                1 => Capacity::Bounded(2),
                _ => Capacity::Unbounded,
            },
        },
        duration,
        quiesce_after: rng.gen_bool(0.7).then(|| duration * 2 / 3),
        read_interval: rng.gen_range(2..=5),
        max_grant_attempts: if rng.gen_bool(0.5) {
            1
        } else {
            DEFAULT_MAX_GRANT_ATTEMPTS
        },
    };
    if n > 2 && rng.gen_bool(0.15) {
        let idx = rng.gen_range(0..n);
        sim.processes[idx].behavior = Behavior::Byzantine(ByzantineScript {
            withhold: rng.gen_bool(0.3),
            extra_delay: rng.gen_range(0..5),
            send_only_to: rng.gen_bool(0.5).then(|| vec![ids[(idx + 1) % n].clone()]),
        });
    }
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: format!("random-{seed}"),
        seed,
        declared_complete: rng.gen_bool(0.5),
        window: rng.gen_range(1..=3),
        expect: BTreeMap::new(),
        body: Body::Simulated(sim),
    }
}

fn read_ops(events: &[Event]) -> Vec<(usize, usize)> {
    let mut open: BTreeMap<&ProcessId, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.op != OpKind::Read {
            continue;
        }
        match e.kind {
            EventKind::Invocation => {
                open.insert(&e.process, i);
            }
            EventKind::Response => {
                if let Some(inv) = open.remove(&e.process) {
                    out.push((inv, i));
                }
            }
            _ => {}
        }
    }
    out
}

fn set_chain(e: &mut Event, chain: Blockchain) {
    e.returned = Some(Returned::Chain(chain));
}

/// Apply one random edit that keeps the event stream well formed.
pub fn mutate<R: Rng>(rng: &mut R, events: &mut Vec<Event>) {
    let reads = read_ops(events);
    match rng.gen_range(0..6) {
        0 if reads.len() >= 2 => {
            let (_, a) = *reads.choose(rng).expect("non-empty");
            let (_, b) = *reads.choose(rng).expect("non-empty");
            let chain = events[b].chain().cloned().expect("read response");
            set_chain(&mut events[a], chain);
        }
        1 if !events.is_empty() => {
            let keep = rng.gen_range(0..events.len());
            events.truncate(keep);
        }
        2 if !reads.is_empty() => {
            let (inv, rsp) = *reads.choose(rng).expect("non-empty");
            events.remove(rsp);
            events.remove(inv);
        }
        3 => {
            let transfers: Vec<usize> = (0..events.len())
                .filter(|&i| events[i].is_instant())
                .collect();
            if let Some(&i) = transfers.choose(rng) {
                events.remove(i);
            }
        }
        4 if !reads.is_empty() => {
            let (_, r) = *reads.choose(rng).expect("non-empty");
            let chain = events[r].chain().cloned().expect("read response");
            let keep = rng.gen_range(1..=chain.len().max(1));
            set_chain(
                &mut events[r],
                Blockchain::new(chain.ids()[..keep.min(chain.len())].to_vec()),
            );
        }
        5 if !reads.is_empty() => {
            let (_, r) = *reads.choose(rng).expect("non-empty");
            let chain = events[r].chain().cloned().expect("read response");
            set_chain(
                &mut events[r],
                chain.extended(BlockId::new(format!("forged-{}", rng.gen::<u16>()))),
            );
        }
        _ => {}
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub histories: usize,
    pub sc_pass_ec_fail: Vec<u64>,
    pub ec_pass_sc_fail: usize,
    pub sc_pass: usize,
    pub ec_pass: usize,
    pub ec_fail: usize,
}

impl HierarchyReport {
    pub fn ok(&self) -> bool {
        self.sc_pass_ec_fail.is_empty()
    }
}

/// One history of the hierarchy corpus: a figure or a simulated run,
/// possibly mutated, with a random window.
pub fn hierarchy_history(root: u64, index: u64) -> Result<(u64, History, u32)> {
    let (s, mut rng) = rng_for(root, index);
    let (history, window) = if index % 10 < 4 {
        let figure = [3, 4, 5, 6][(index % 10) as usize];
        let events = netsim::figures::figure(figure).expect("figure exists");
        (History::record(events)?, rng.gen_range(1..=3))
    } else {
        let scenario = random_scenario(&mut rng, s);
        let out = netsim::run(&scenario)?;
        (out.history, scenario.window)
    };
    let complete = rng.gen_bool(0.5);
    let mut events = history.events().to_vec();
    if rng.gen_bool(0.5) {
        for _ in 0..rng.gen_range(1..=3) {
            mutate(&mut rng, &mut events);
        }
    }
    let correct = history.correct().clone();
    let mutated = History::record(events)?
        .with_processes(history.processes().iter().cloned())
        .with_correct(correct)?
        .declared_complete(complete);
    Ok((s, mutated, window))
}

pub fn hierarchy(runs: u64, root: u64) -> Result<HierarchyReport> {
    let mut report = HierarchyReport::default();
    for i in 0..runs {
        let (s, h, window) = hierarchy_history(root, i)?;
        let checker = Checker::with_window(window)?;
        let sc = checker.sc(&h).status;
        let ec = checker.ec(&h).status;
        report.histories += 1;
        report.sc_pass += usize::from(sc == Status::Pass);
        report.ec_pass += usize::from(ec == Status::Pass);
        report.ec_fail += usize::from(ec == Status::Fail);
        if sc == Status::Pass && ec == Status::Fail {
            report.sc_pass_ec_fail.push(s);
        }
        if ec == Status::Pass && sc == Status::Fail {
            report.ec_pass_sc_fail += 1;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// k-fork coherence and oracle containment

/// Appends interleaved with sparse deliveries, so stale leaves are common.
pub fn random_schedule<R: Rng>(
    rng: &mut R,
    procs: &[ProcessId],
    appends_each: usize,
    deliver_p: f64,
) -> Vec<Step> {
    let mut left: Vec<usize> = vec![appends_each; procs.len()];
    let mut named: Vec<BlockId> = Vec::new();
    let mut steps = Vec::new();
    while left.iter().any(|&l| l > 0) {
        if !named.is_empty() && rng.gen_bool(deliver_p) {
            let to = procs.choose(rng).cloned().expect("non-empty");
            let block = named.choose(rng).cloned().expect("non-empty");
            steps.push(Step::Deliver { to, block });
            continue;
        }
        let candidates: Vec<usize> = (0..procs.len()).filter(|&p| left[p] > 0).collect();
        let p = *candidates.choose(rng).expect("some appends left");
        let seq = appends_each - left[p] + 1;
        left[p] -= 1;
        let block = BlockId::new(format!("{}-{seq}", procs[p]));
        named.push(block.clone());
        steps.push(Step::Append {
            caller: procs[p].clone(),
            block,
        });
    }
    steps
}

fn schedule_processes<R: Rng>(rng: &mut R, n: usize) -> Vec<(ProcessId, Merit)> {
    pids(n, "q")
        .into_iter()
        .map(|p| (p, random_merit(rng)))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KForkReport {
    pub k: usize,
    pub runs: u64,
    pub max_fork_count: usize,
    pub runs_reaching_k: u64,
    pub violations: Vec<u64>,
}

impl KForkReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tight(&self) -> bool {
        self.runs_reaching_k > 0
    }
}

pub fn kfork(k: usize, runs: u64, root: u64) -> Result<KForkReport> {
    let mut report = KForkReport {
        k,
        runs,
        ..KForkReport::default()
    };
    for i in 0..runs {
        let (s, mut rng) = rng_for(root ^ k as u64, i);
        let procs = schedule_processes(&mut rng, k + 2);
        let ids: Vec<ProcessId> = procs.iter().map(|(p, _)| p.clone()).collect();
        let steps = random_schedule(&mut rng, &ids, 2, 0.3);
        let run = execute_schedule(&procs, Capacity::Bounded(k), s, &steps)?;
        let union = run.union_tree();
        let forks = max_fork_count(&union);
        let mut per_parent: BTreeMap<&BlockId, usize> = BTreeMap::new();
        for a in &run.successes {
            *per_parent.entry(&a.parent).or_default() += 1;
        }
        let worst_append = per_parent.values().copied().max().unwrap_or(0);
        let worst_set = run
            .oracle
            .consumed_sets()
            .values()
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        report.max_fork_count = report.max_fork_count.max(forks);
        if forks > k || worst_append > k || worst_set > k {
            report.violations.push(s);
        }
        if forks == k {
            report.runs_reaching_k += 1;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub runs: u64,
    pub replays: u64,
    pub mismatches: Vec<u64>,
}

impl ContainmentReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Replay each frugal-`k` schedule, failed appends purged, against larger
/// capacities and the prodigal oracle.
pub fn containment(runs: u64, root: u64) -> Result<ContainmentReport> {
    let mut report = ContainmentReport {
        runs,
        ..ContainmentReport::default()
    };
    for i in 0..runs {
        let (s, mut rng) = rng_for(root, i);
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=5);
        let procs = schedule_processes(&mut rng, n);
        let ids: Vec<ProcessId> = procs.iter().map(|(p, _)| p.clone()).collect();
        let each = rng.gen_range(1..=3);
        let steps = random_schedule(&mut rng, &ids, each, 0.4);
        let original = execute_schedule(&procs, Capacity::Bounded(k), s, &steps)?;
        let purged = original.purged(&steps);
        let targets = [
            Capacity::Bounded(k),
            Capacity::Bounded(k + 1),
            Capacity::Bounded(k + 3),
            Capacity::Unbounded,
        ];
        for capacity in targets {
            let replay = execute_schedule(&procs, capacity, seed::mix64(s), &purged)?;
            report.replays += 1;
            if replay.successes != original.successes {
                report.mismatches.push(s);
                break;
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Shared-memory lab

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub runs: u64,
    pub agreement: u64,
    pub integrity: u64,
    pub validity: u64,
    pub termination: u64,
    pub exhausted: u64,
    pub crashed_runs: u64,
    pub violations: Vec<u64>,
}

impl ConsensusReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
            && self.agreement == self.runs
            && self.integrity == self.runs
            && self.validity == self.runs
            && self.termination == self.runs - self.exhausted
    }
}

pub struct ConsensusRun {
    pub outputs: Vec<Vec<ProposeOutcome>>,
    /// Crash points by proposer index.
    pub crashes: BTreeMap<usize, usize>,
    pub oracle: OracleState,
    pub proposed: Vec<Block>,
}

/// One consensus run among `n` proposers with at most `f` crashes.
pub fn consensus_run(s: u64, n: usize, f: usize, max_attempts: u64) -> Result<ConsensusRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(s);
    let mut oracle = OracleState::frugal(1);
    let ids = pids(n, "c");
    let mut proposers = Vec::new();
    let mut proposed = Vec::new();
    for id in &ids {
        oracle.register(
            id.clone(),
            random_merit(&mut rng),
            seed::derive(s, id.as_str()),
        );
        let block = Block::new(format!("{id}-v"));
        proposed.push(block.clone());
        proposers.push(Proposer::new(
            id.clone(),
            block,
            BlockId::from(crate::blocktree::GENESIS_ID),
            max_attempts,
        ));
    }
    let mut crashes = BTreeMap::new();
    for _ in 0..f {
        if rng.gen_bool(0.5) {
            crashes.insert(rng.gen_range(0..n), rng.gen_range(0..6));
        }
    }
    let max_steps = n * (max_attempts as usize + 2);
    let run = run_random(&mut oracle, &mut proposers, &mut rng, &crashes, max_steps)?;
    Ok(ConsensusRun {
        outputs: run.outputs,
        crashes,
        oracle,
        proposed,
    })
}

pub fn consensus(
    runs: u64,
    root: u64,
    n: usize,
    f: usize,
    max_attempts: u64,
) -> Result<ConsensusReport> {
    let mut r = ConsensusReport {
        runs,
        ..ConsensusReport::default()
    };
    for i in 0..runs {
        let s = seed::nth(root, i);
        let ConsensusRun {
            outputs,
            crashes,
            oracle,
            proposed,
        } = consensus_run(s, n, f, max_attempts)?;
        r.crashed_runs += u64::from(!crashes.is_empty());
        let decided: Vec<&Block> = outputs
            .iter()
            .flatten()
            .filter_map(|o| match o {
                ProposeOutcome::Decided(b) => Some(b),
                ProposeOutcome::Exhausted { .. } => None,
            })
            .collect();
        let exhausted = outputs
            .iter()
            .flatten()
            .any(|o| matches!(o, ProposeOutcome::Exhausted { .. }));
        let agreement = decided.windows(2).all(|w| w[0] == w[1]);
        let integrity = outputs.iter().all(|o| o.len() <= 1);
        let validity = decided.iter().all(|b| {
            oracle.is_issued(b)
                && oracle
                    .consumed(&BlockId::from(crate::blocktree::GENESIS_ID))
                    .contains(b)
                && proposed.iter().any(|p| p.id == b.id)
        });
        let termination = (0..n).all(|p| crashes.contains_key(&p) || outputs[p].len() == 1);
        r.agreement += u64::from(agreement);
        r.integrity += u64::from(integrity);
        r.validity += u64::from(validity);
        r.exhausted += u64::from(exhausted);
        r.termination += u64::from(termination && !exhausted);
        if !(agreement && integrity && validity && (termination || exhausted)) {
            r.violations.push(s);
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub configurations: u64,
    pub interleavings: u64,
    pub crash_variants: u64,
    pub mismatches: u64,
    pub wait_free_violations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_mismatch: Option<String>,
}

impl EquivalenceReport {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.wait_free_violations == 0
    }

    fn mismatch(&mut self, what: String) {
        self.mismatches += 1;
        self.first_mismatch.get_or_insert(what);
    }
}

fn crash_variants(counts: &[usize]) -> Vec<BTreeMap<usize, usize>> {
    let mut out = vec![BTreeMap::new()];
    for (p, &c) in counts.iter().enumerate() {
        for point in 0..c {
            out.push(BTreeMap::from([(p, point)]));
        }
    }
    out
}

fn stamped_ops(oracle: &mut OracleState, ops: &[usize]) -> Result<Vec<Vec<Block>>> {
    let h = BlockId::from(crate::blocktree::GENESIS_ID);
    let mut all = Vec::new();
    for (p, &m) in ops.iter().enumerate() {
        let id = ProcessId::new(format!("c{p}"));
        oracle.register(id.clone(), Merit::full(), p as u64);
        let mut mine = Vec::new();
        for j in 0..m {
            let b = oracle
                .get_token(&h, &Block::new(format!("c{p}-{j}")), &id)?
                .expect("full merit always grants");
            mine.push(b);
        }
        all.push(mine);
    }
    Ok(all)
}

/// Exhaustively compare `cas_via_ct` with direct compare-and-swap for up to
/// three callers with up to two operations (four steps) each.
pub fn cas_equivalence(max_callers: usize, max_ops: usize) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport::default();
    for callers in 1..=max_callers {
        let mut configs: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..callers {
            configs = configs
                .into_iter()
                .flat_map(|c| {
                    (1..=max_ops).map(move |m| {
                        let mut c = c.clone();
                        c.push(m);
                        c
                    })
                })
                .collect();
        }
        for ops in configs {
            report.configurations += 1;
            let mut base = OracleState::frugal(1);
            let blocks = stamped_ops(&mut base, &ops)?;
            let counts: Vec<usize> = ops.iter().map(|m| 2 * m).collect();
            let total: usize = counts.iter().sum();
            let variants = if total <= 8 {
                crash_variants(&counts)
            } else {
                vec![BTreeMap::new()]
            };
            for order in interleavings(&counts) {
                report.interleavings += 1;
                for crashes in &variants {
                    report.crash_variants += u64::from(!crashes.is_empty());
                    check_cas_case(&base, &blocks, &counts, &order, crashes, &mut report)?;
                }
            }
        }
    }
    Ok(report)
}

fn check_cas_case(
    base: &OracleState,
    blocks: &[Vec<Block>],
    counts: &[usize],
    order: &[usize],
    crashes: &BTreeMap<usize, usize>,
    report: &mut EquivalenceReport,
) -> Result<()> {
    let n = blocks.len();
    let mut lab = CtLab::new(base.clone())?;
    let mut callers: Vec<CasViaCtCaller> = blocks
        .iter()
        .enumerate()
        .map(|(p, b)| CasViaCtCaller::new(p, b.clone()))
        .collect();
    let schedule = CrashSchedule::new(
        n,
        usize::from(!crashes.is_empty()).min(n.saturating_sub(1)),
        order.to_vec(),
        crashes.clone(),
    );
    let schedule = match schedule {
        Ok(s) => s,
        Err(_) => return Ok(()),
    };
    let ct = run_schedule(&mut lab, &mut callers, &schedule)?;

    let mut space: RegisterSpace<Vec<Block>> = RegisterSpace::new(1, Vec::new());
    let mut direct: Vec<CasCaller> = blocks.iter().map(|b| CasCaller::new(b.clone())).collect();
    let lin: Vec<usize> = lab.linearization.iter().map(|(p, _)| *p).collect();
    let reference = run_schedule(
        &mut space,
        &mut direct,
        &CrashSchedule::new(n, 0, lin, BTreeMap::new())?,
    )?;

    for (p, outs) in ct.outputs.iter().enumerate() {
        for (op, got) in outs {
            let want = reference.outputs[p]
                .iter()
                .find(|(o, _)| o == op)
                .map(|(_, v)| v);
            if want != Some(got) {
                report.mismatch(format!(
                    "order {order:?} crashes {crashes:?}: caller {p} op {op}"
                ));
            }
        }
        let crashed = crashes.contains_key(&p);
        if !crashed && (ct.own_steps[p] != counts[p] || outs.len() != counts[p] / 2) {
            report.wait_free_violations += 1;
        }
    }
    let winners = ct
        .outputs
        .iter()
        .flatten()
        .filter(|(_, v)| v.is_empty())
        .count();
    let complete = ct.outputs.iter().zip(counts).all(|(o, c)| o.len() == c / 2);
    if winners > 1 || (complete && winners != 1) {
        report.mismatch(format!("order {order:?}: {winners} successful swaps"));
    }
    Ok(())
}

struct SnapLab {
    bank: SnapshotBank,
    reference: OracleState,
}

/// A snapshot-based consumer checked step by step against the prodigal
/// oracle: each update also consumes on the reference, and each scan must
/// equal the reference set at that moment.
struct CheckedSnapshot(SnapshotCaller);

impl Machine for CheckedSnapshot {
    type Shared = SnapLab;
    type Output = (Vec<Block>, Vec<Block>);

    fn step(&mut self, lab: &mut SnapLab) -> Result<Option<Self::Output>> {
        let updating = !self.0.has_updated();
        let out = self.0.step(&mut lab.bank)?;
        if updating {
            lab.reference.consume_token(self.0.stamped());
        }
        Ok(out.map(|scan| {
            let h = BlockId::from(crate::blocktree::GENESIS_ID);
            (scan, lab.reference.consumed(&h).to_vec())
        }))
    }

    fn done(&self) -> bool {
        self.0.done()
    }
}

fn as_set(blocks: &[Block]) -> BTreeSet<&BlockId> {
    blocks.iter().map(|b| &b.id).collect()
}

/// Exhaustively compare `ct_via_snapshot` with prodigal consumption for
/// `callers` concurrent consumers, including single crashes.
pub fn snapshot_equivalence(callers: usize) -> Result<EquivalenceReport> {
    let mut report = EquivalenceReport {
        configurations: 1,
        ..EquivalenceReport::default()
    };
    let mut base = OracleState::prodigal();
    let blocks: Vec<Block> = stamped_ops(&mut base, &vec![1; callers])?
        .into_iter()
        .flatten()
        .collect();
    let counts = vec![2; callers];
    for order in interleavings(&counts) {
        report.interleavings += 1;
        for crashes in crash_variants(&counts) {
            report.crash_variants += u64::from(!crashes.is_empty());
            let mut lab = SnapLab {
                bank: SnapshotBank::new(callers),
                reference: base.clone(),
            };
            let mut machines: Vec<CheckedSnapshot> = blocks
                .iter()
                .enumerate()
                .map(|(m, b)| CheckedSnapshot(SnapshotCaller::new(m, b.clone())))
                .collect();
            let f = usize::from(!crashes.is_empty()).min(callers - 1);
            let Ok(schedule) = CrashSchedule::new(callers, f, order.clone(), crashes.clone())
            else {
                continue;
            };
            let run = run_schedule(&mut lab, &mut machines, &schedule)?;
            let mut union = BTreeSet::new();
            for (p, outs) in run.outputs.iter().enumerate() {
                for (scan, expected) in outs {
                    if as_set(scan) != as_set(expected) || !as_set(scan).contains(&blocks[p].id) {
                        report.mismatch(format!("order {order:?} crashes {crashes:?}: caller {p}"));
                    }
                    union.extend(scan.iter().map(|b| b.id.clone()));
                }
                if !crashes.contains_key(&p) && (outs.len() != 1 || run.own_steps[p] != 2) {
                    report.wait_free_violations += 1;
                }
            }
            if crashes.is_empty() && union.len() != callers {
                report.mismatch(format!("order {order:?}: union of scans misses a token"));
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShmReport {
    pub consensus: ConsensusReport,
    pub cas: EquivalenceReport,
    pub snapshot: EquivalenceReport,
}

impl ShmReport {
    pub fn ok(&self) -> bool {
        self.consensus.ok() && self.cas.ok() && self.snapshot.ok()
    }
}

/// Consensus campaign over `runs` seeds plus the exhaustive equivalences.
pub fn shm(runs: u64, root: u64) -> Result<ShmReport> {
    Ok(ShmReport {
        consensus: consensus(runs, root, 4, 1, DEFAULT_MAX_GRANT_ATTEMPTS)?,
        cas: cas_equivalence(3, 2)?,
        snapshot: snapshot_equivalence(3)?,
    })
}
