use super::registers::RegisterSpace;
use super::schedule::Machine;
use crate::blocktree::Block;
use crate::error::{Error, Result};
use crate::ids::{BlockId, ProcessId};
use crate::oracle::{Capacity, OracleState};

fn require_single_slot(oracle: &OracleState) -> Result<()> {
    if oracle.capacity() != Capacity::Bounded(1) {
        return Err(Error::ContractViolation(format!(
            "compare-and-swap needs an oracle of capacity 1, got {}",
            oracle.capacity()
        )));
    }
    Ok(())
}

fn require_stamped(oracle: &OracleState, b: &Block) -> Result<()> {
    if !oracle.is_issued(b) {
        return Err(Error::ContractViolation(format!(
            "block {} does not carry a token issued by this oracle",
            b.id
        )));
    }
    Ok(())
}

fn ct_to_cas_result(returned: Vec<Block>, own: &Block) -> Vec<Block> {
    if returned.len() == 1 && &returned[0] == own {
        Vec::new()
    } else {
        returned
    }
}

/// `CAS(K[h], {}, {b})` built from one `consume_token` call on a capacity-1
/// oracle.
pub fn cas_via_ct(oracle: &mut OracleState, stamped: &Block) -> Result<Vec<Block>> {
    require_single_slot(oracle)?;
    require_stamped(oracle, stamped)?;
    let returned = oracle.consume_token(stamped);
    Ok(ct_to_cas_result(returned, stamped))
}

/// Shared state for step-level `cas_via_ct` callers. `linearization`
/// records `(caller, op)` at the moment each consume executes.
#[derive(Clone, Debug)]
pub struct CtLab {
    pub oracle: OracleState,
    pub linearization: Vec<(usize, usize)>,
}

impl CtLab {
    pub fn new(oracle: OracleState) -> Result<Self> {
        require_single_slot(&oracle)?;
        Ok(CtLab {
            oracle,
            linearization: Vec::new(),
        })
    }
}

/// Runs `cas_via_ct` on each of its blocks in turn: one step to consume,
/// one step to compare and return.
#[derive(Clone, Debug)]
pub struct CasViaCtCaller {
    id: usize,
    ops: Vec<Block>,
    next: usize,
    returned: Option<Vec<Block>>,
}

impl CasViaCtCaller {
    pub fn new(id: usize, ops: Vec<Block>) -> Self {
        CasViaCtCaller {
            id,
            ops,
            next: 0,
            returned: None,
        }
    }
}

impl Machine for CasViaCtCaller {
    type Shared = CtLab;
    type Output = (usize, Vec<Block>);

    fn step(&mut self, lab: &mut CtLab) -> Result<Option<Self::Output>> {
        let own = &self.ops[self.next];
        match self.returned.take() {
            None => {
                require_stamped(&lab.oracle, own)?;
                self.returned = Some(lab.oracle.consume_token(own));
                lab.linearization.push((self.id, self.next));
                Ok(None)
            }
            Some(returned) => {
                let out = (self.next, ct_to_cas_result(returned, own));
                self.next += 1;
                Ok(Some(out))
            }
        }
    }

    fn done(&self) -> bool {
        self.next == self.ops.len()
    }
}

/// Direct compare-and-swap on register 0, one step per block.
#[derive(Clone, Debug)]
pub struct CasCaller {
    ops: Vec<Block>,
    next: usize,
}

impl CasCaller {
    pub fn new(ops: Vec<Block>) -> Self {
        CasCaller { ops, next: 0 }
    }
}

impl Machine for CasCaller {
    type Shared = RegisterSpace<Vec<Block>>;
    type Output = (usize, Vec<Block>);

    fn step(&mut self, space: &mut Self::Shared) -> Result<Option<Self::Output>> {
        let b = self.ops[self.next].clone();
        let previous = space.cas(0, &Vec::new(), vec![b])?;
        self.next += 1;
        Ok(Some((self.next - 1, previous)))
    }

    fn done(&self) -> bool {
        self.next == self.ops.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProposeOutcome {
    Decided(Block),
    Exhausted { attempts: u64 },
}

/// Consensus from a capacity-1 oracle: request a token on genesis until one
/// is granted (one step per request), then consume it and decide the single
/// element of the returned set (one step).
#[derive(Clone, Debug)]
pub struct Proposer {
    caller: ProcessId,
    block: Block,
    genesis: BlockId,
    max_attempts: u64,
    attempts: u64,
    stamped: Option<Block>,
    finished: bool,
}

impl Proposer {
    pub fn new(caller: ProcessId, block: Block, genesis: BlockId, max_attempts: u64) -> Self {
        Proposer {
            caller,
            block,
            genesis,
            max_attempts,
            attempts: 0,
            stamped: None,
            finished: false,
        }
    }

    pub fn caller(&self) -> &ProcessId {
        &self.caller
    }
}

impl Machine for Proposer {
    type Shared = OracleState;
    type Output = ProposeOutcome;

    fn step(&mut self, oracle: &mut OracleState) -> Result<Option<ProposeOutcome>> {
        if let Some(stamped) = self.stamped.take() {
            let set = oracle.consume_token(&stamped);
            self.finished = true;
            return match set.as_slice() {
                [decided] => Ok(Some(ProposeOutcome::Decided(decided.clone()))),
                _ => Err(Error::ContractViolation(format!(
                    "consensus needs a singleton set, got {} blocks",
                    set.len()
                ))),
            };
        }
        if self.attempts == self.max_attempts {
            self.finished = true;
            return Ok(Some(ProposeOutcome::Exhausted {
                attempts: self.attempts,
            }));
        }
        self.attempts += 1;
        self.stamped = oracle.get_token(&self.genesis, &self.block, &self.caller)?;
        Ok(None)
    }

    fn done(&self) -> bool {
        self.finished
    }
}

/// Run one proposal to completion without interference.
pub fn propose(
    oracle: &mut OracleState,
    caller: &ProcessId,
    block: Block,
    max_attempts: u64,
) -> Result<ProposeOutcome> {
    require_single_slot(oracle)?;
    let mut p = Proposer::new(
        caller.clone(),
        block,
        BlockId::from(crate::blocktree::GENESIS_ID),
        max_attempts,
    );
    loop {
        if let Some(out) = p.step(oracle)? {
            return Ok(out);
        }
    }
}

/// An atomic snapshot object with one register per token.
#[derive(Clone, Debug)]
pub struct SnapshotBank {
    space: RegisterSpace<Option<Block>>,
}

impl SnapshotBank {
    pub fn new(n: usize) -> Self {
        SnapshotBank {
            space: RegisterSpace::new(n, None),
        }
    }

    pub fn update(&mut self, index: usize, block: Block) -> Result<()> {
        self.space.write(index, Some(block))
    }

    pub fn scan(&mut self) -> Vec<Block> {
        self.space.scan().into_iter().flatten().collect()
    }
}

/// Prodigal `consume_token` built from an atomic snapshot: write the token to
/// its own register, then scan.
pub fn ct_via_snapshot(
    bank: &mut SnapshotBank,
    index: usize,
    stamped: &Block,
) -> Result<Vec<Block>> {
    if stamped.token.is_none() {
        return Err(Error::ContractViolation(format!(
            "block {} carries no token",
            stamped.id
        )));
    }
    bank.update(index, stamped.clone())?;
    Ok(bank.scan())
}

/// Step-level `ct_via_snapshot`: update, then scan.
#[derive(Clone, Debug)]
pub struct SnapshotCaller {
    index: usize,
    stamped: Block,
    updated: bool,
    finished: bool,
}

impl SnapshotCaller {
    pub fn new(index: usize, stamped: Block) -> Self {
        SnapshotCaller {
            index,
            stamped,
            updated: false,
            finished: false,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn stamped(&self) -> &Block {
        &self.stamped
    }

    pub fn has_updated(&self) -> bool {
        self.updated
    }
}

impl Machine for SnapshotCaller {
    type Shared = SnapshotBank;
    type Output = Vec<Block>;

    fn step(&mut self, bank: &mut SnapshotBank) -> Result<Option<Vec<Block>>> {
        if !self.updated {
            bank.update(self.index, self.stamped.clone())?;
            self.updated = true;
            return Ok(None);
        }
        self.finished = true;
        Ok(Some(bank.scan()))
    }

    fn done(&self) -> bool {
        self.finished
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Merit;

    fn granted(oracle: &mut OracleState, p: &str, id: &str) -> Block {
        oracle
            .get_token(&"b0".into(), &Block::new(id), &p.into())
            .unwrap()
            .unwrap()
    }

    fn one_slot(procs: &[&str]) -> OracleState {
        let mut o = OracleState::frugal(1);
        for (i, p) in procs.iter().enumerate() {
            o.register((*p).into(), Merit::full(), i as u64);
        }
        o
    }

    #[test]
    fn cas_via_ct_on_empty_and_occupied_slot() {
        let mut o = one_slot(&["p", "q"]);
        let r = granted(&mut o, "p", "r");
        let b = granted(&mut o, "q", "b");
        assert!(cas_via_ct(&mut o, &r).unwrap().is_empty());
        assert_eq!(cas_via_ct(&mut o, &b).unwrap(), vec![r]);
        assert!(cas_via_ct(&mut o, &Block::new("x").with_parent("b0")).is_err());
        assert!(cas_via_ct(&mut OracleState::prodigal(), &b).is_err());
    }

    #[test]
    fn lone_proposer_decides_its_block() {
        let mut o = one_slot(&["p"]);
        match propose(&mut o, &"p".into(), Block::new("mine"), 10).unwrap() {
            ProposeOutcome::Decided(b) => assert_eq!(b.id, "mine".into()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn snapshot_consumption_accumulates() {
        let mut o = OracleState::prodigal();
        o.register("p".into(), Merit::full(), 0);
        let a = granted(&mut o, "p", "a");
        let b = granted(&mut o, "p", "b");
        let mut bank = SnapshotBank::new(2);
        assert_eq!(ct_via_snapshot(&mut bank, 0, &a).unwrap(), vec![a.clone()]);
        assert_eq!(ct_via_snapshot(&mut bank, 1, &b).unwrap(), vec![a, b]);
        assert!(ct_via_snapshot(&mut bank, 0, &Block::new("c")).is_err());
    }
}
