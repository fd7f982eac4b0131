//! The BlockTree whose `append` is driven by a token oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blocktree::{Block, BlockTree, Blockchain};
use crate::error::{Error, Result};
use crate::ids::{BlockId, ProcessId};
use crate::oracle::{Capacity, Merit, OracleState};
use crate::policy::SelectionPolicy;

pub const DEFAULT_MAX_GRANT_ATTEMPTS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AppendOutcome {
    /// Token granted, consumed, and the block concatenated.
    Appended { block: Block, attempts: u64 },
    /// Token granted but the oracle's set for that parent was full.
    Rejected {
        stamped: Block,
        holders: Vec<Block>,
        attempts: u64,
    },
    /// No token within the attempt budget.
    Exhausted { attempts: u64 },
    /// The candidate id already exists in the local tree.
    Invalid,
}

impl AppendOutcome {
    pub fn succeeded(&self) -> bool {
        matches!(self, AppendOutcome::Appended { .. })
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, AppendOutcome::Exhausted { .. })
    }

    pub fn attempts(&self) -> u64 {
        match self {
            AppendOutcome::Appended { attempts, .. }
            | AppendOutcome::Rejected { attempts, .. }
            | AppendOutcome::Exhausted { attempts } => *attempts,
            AppendOutcome::Invalid => 0,
        }
    }
}

/// One replica of the refined BlockTree. Every non-genesis block carries a
/// token whose parent is its tree parent.
#[derive(Clone, Debug)]
pub struct RefinedLedger {
    tree: BlockTree,
    policy: SelectionPolicy,
    max_grant_attempts: u64,
    orphans: BTreeMap<BlockId, Vec<Block>>,
}

impl Default for RefinedLedger {
    fn default() -> Self {
        RefinedLedger::new(SelectionPolicy::tokenized())
    }
}

impl RefinedLedger {
    pub fn new(policy: SelectionPolicy) -> Self {
        RefinedLedger {
            tree: BlockTree::new(),
            policy,
            max_grant_attempts: DEFAULT_MAX_GRANT_ATTEMPTS,
            orphans: BTreeMap::new(),
        }
    }

    pub fn with_max_grant_attempts(mut self, max: u64) -> Self {
        self.max_grant_attempts = max;
        self
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn policy(&self) -> &SelectionPolicy {
        &self.policy
    }

    pub fn read(&self) -> Blockchain {
        self.policy.choose(&self.tree)
    }

    fn leaf(&self) -> BlockId {
        self.read().leaf().cloned().expect("chains are never empty")
    }

    /// Request tokens against the current leaf until one is granted, then
    /// consume it and concatenate on acceptance. The whole call is one atomic
    /// step with respect to other callers of the same oracle.
    pub fn refined_append(
        &mut self,
        oracle: &mut OracleState,
        candidate: Block,
        caller: &ProcessId,
    ) -> Result<AppendOutcome> {
        if candidate.token.is_some() {
            return Err(Error::AlreadyStamped(candidate.id));
        }
        if self.tree.contains(&candidate.id) {
            return Ok(AppendOutcome::Invalid);
        }
        let mut attempts = 0;
        let stamped = loop {
            if attempts == self.max_grant_attempts {
                return Ok(AppendOutcome::Exhausted { attempts });
            }
            attempts += 1;
            let h = self.leaf();
            if let Some(stamped) = oracle.get_token(&h, &candidate, caller)? {
                break stamped;
            }
        };
        let holders = oracle.consume_token(&stamped);
        if holders.contains(&stamped) && self.policy.is_valid(&stamped, &self.tree) {
            self.tree.insert(stamped.clone())?;
            self.adopt_orphans(&stamped.id, &mut Vec::new());
            Ok(AppendOutcome::Appended {
                block: stamped,
                attempts,
            })
        } else {
            Ok(AppendOutcome::Rejected {
                stamped,
                holders,
                attempts,
            })
        }
    }

    /// Insert a block learned from elsewhere. Blocks whose parent is not yet
    /// known are buffered. Returns the blocks actually inserted, in order.
    pub fn receive(&mut self, block: Block) -> Vec<Block> {
        let mut inserted = Vec::new();
        if self.tree.contains(&block.id) {
            return inserted;
        }
        let Some(parent) = block.parent.clone() else {
            return inserted;
        };
        if !self.tree.contains(&parent) {
            let waiting = self.orphans.entry(parent).or_default();
            if !waiting.iter().any(|b| b.id == block.id) {
                waiting.push(block);
            }
            return inserted;
        }
        if self.policy.is_valid(&block, &self.tree) && self.tree.insert(block.clone()).is_ok() {
            let id = block.id.clone();
            inserted.push(block);
            self.adopt_orphans(&id, &mut inserted);
        }
        inserted
    }

    fn adopt_orphans(&mut self, parent: &BlockId, inserted: &mut Vec<Block>) {
        let mut frontier = vec![parent.clone()];
        while let Some(p) = frontier.pop() {
            for child in self.orphans.remove(&p).unwrap_or_default() {
                if self.policy.is_valid(&child, &self.tree)
                    && self.tree.insert(child.clone()).is_ok()
                {
                    frontier.push(child.id.clone());
                    inserted.push(child);
                }
            }
        }
    }

    pub fn orphan_count(&self) -> usize {
        self.orphans.values().map(Vec::len).sum()
    }
}

/// Number of children of `parent`.
pub fn fork_count(tree: &BlockTree, parent: &BlockId) -> Result<usize> {
    tree.children(parent)
        .map(|c| c.len())
        .ok_or_else(|| Error::UnknownBlock(parent.clone()))
}

/// Largest fork count over every block of the tree.
pub fn max_fork_count(tree: &BlockTree) -> usize {
    tree.blocks()
        .filter_map(|b| tree.children(&b.id).map(|c| c.len()))
        .max()
        .unwrap_or(0)
}

/// Union of several replicas' trees.
pub fn merge_trees<'a>(trees: impl IntoIterator<Item = &'a BlockTree>) -> BlockTree {
    let mut pending: BTreeMap<BlockId, Block> = BTreeMap::new();
    let mut merged = BlockTree::new();
    for tree in trees {
        for b in tree.blocks() {
            if b.parent.is_some() {
                pending.insert(b.id.clone(), b.clone());
            }
        }
    }
    loop {
        let ready: Vec<BlockId> = pending
            .values()
            .filter(|b| b.parent.as_ref().is_some_and(|p| merged.contains(p)))
            .map(|b| b.id.clone())
            .collect();
        if ready.is_empty() {
            break;
        }
        for id in ready {
            let b = pending.remove(&id).expect("ready block is pending");
            merged.insert(b).expect("parent present and id fresh");
        }
    }
    merged
}

/// One step of a replica-level schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    /// `caller` runs `refined_append` of a fresh block named `block`.
    Append { caller: ProcessId, block: BlockId },
    /// `to` learns `block` if it has been appended somewhere; no-op otherwise.
    Deliver { to: ProcessId, block: BlockId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessfulAppend {
    pub caller: ProcessId,
    pub parent: BlockId,
    pub block: BlockId,
}

#[derive(Clone, Debug)]
pub struct ScheduleRun {
    pub outcomes: Vec<Option<AppendOutcome>>,
    pub successes: Vec<SuccessfulAppend>,
    pub replicas: BTreeMap<ProcessId, RefinedLedger>,
    pub oracle: OracleState,
}

impl ScheduleRun {
    pub fn union_tree(&self) -> BlockTree {
        merge_trees(self.replicas.values().map(RefinedLedger::tree))
    }

    /// The schedule with every append that did not succeed removed.
    pub fn purged(&self, steps: &[Step]) -> Vec<Step> {
        steps
            .iter()
            .zip(&self.outcomes)
            .filter(|(step, outcome)| match step {
                Step::Append { .. } => outcome.as_ref().is_some_and(AppendOutcome::succeeded),
                Step::Deliver { .. } => true,
            })
            .map(|(s, _)| s.clone())
            .collect()
    }
}

/// Run a schedule over one replica per process sharing one oracle.
pub fn execute_schedule(
    processes: &[(ProcessId, Merit)],
    capacity: Capacity,
    seed: u64,
    steps: &[Step],
) -> Result<ScheduleRun> {
    let mut oracle = OracleState::new(capacity);
    let mut replicas = BTreeMap::new();
    for (p, merit) in processes {
        oracle.register(p.clone(), *merit, crate::seed::derive(seed, p.as_str()));
        replicas.insert(p.clone(), RefinedLedger::default());
    }
    let mut appended: BTreeMap<BlockId, Block> = BTreeMap::new();
    let mut outcomes = Vec::with_capacity(steps.len());
    let mut successes = Vec::new();
    for step in steps {
        match step {
            Step::Append { caller, block } => {
                let ledger = replicas
                    .get_mut(caller)
                    .ok_or_else(|| Error::UnknownProcess(caller.clone()))?;
                let outcome =
                    ledger.refined_append(&mut oracle, Block::new(block.clone()), caller)?;
                if let AppendOutcome::Appended { block, .. } = &outcome {
                    successes.push(SuccessfulAppend {
                        caller: caller.clone(),
                        parent: block.parent.clone().expect("appended blocks have parents"),
                        block: block.id.clone(),
                    });
                    appended.insert(block.id.clone(), block.clone());
                }
                outcomes.push(Some(outcome));
            }
            Step::Deliver { to, block } => {
                if let Some(b) = appended.get(block) {
                    replicas
                        .get_mut(to)
                        .ok_or_else(|| Error::UnknownProcess(to.clone()))?
                        .receive(b.clone());
                }
                outcomes.push(None);
            }
        }
    }
    Ok(ScheduleRun {
        outcomes,
        successes,
        replicas,
        oracle,
    })
}
