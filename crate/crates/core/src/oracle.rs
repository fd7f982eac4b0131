//! Token oracles: merit-indexed tapes and the capacity-bounded consumption
//! array. Capacity `k` gives the frugal oracle; unbounded capacity is the
//! prodigal one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::blocktree::Block;
use crate::error::{Error, Result};
use crate::ids::{BlockId, ProcessId};

pub type Rational = Ratio<u64>;

/// Parse "3/4", "0.25" or "1".
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::InvalidMerit(format!("cannot parse {text:?} as a rational"));
    if let Some((n, d)) = text.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.len() > 18 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let numer = int
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        return Ok(Ratio::new(numer, scale));
    }
    Ok(Ratio::from_integer(text.parse().map_err(|_| bad())?))
}

fn unit_interval(r: Rational, what: &str) -> Result<Rational> {
    if *r.numer() == 0 || r > Ratio::from_integer(1) {
        return Err(Error::InvalidMerit(format!("{what} {r} is outside (0, 1]")));
    }
    Ok(r)
}

/// A merit value together with the grant probability it induces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Merit {
    value: Rational,
    grant_probability: Rational,
}

impl Merit {
    /// Grant probability equal to the merit itself.
    pub fn new(value: Rational) -> Result<Self> {
        let value = unit_interval(value, "merit")?;
        Ok(Merit {
            value,
            grant_probability: value,
        })
    }

    pub fn with_probability(value: Rational, grant_probability: Rational) -> Result<Self> {
        Ok(Merit {
            value: unit_interval(value, "merit")?,
            grant_probability: unit_interval(grant_probability, "grant probability")?,
        })
    }

    pub fn ratio(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidMerit("zero denominator".into()));
        }
        Merit::new(Ratio::new(numer, denom))
    }

    pub fn full() -> Self {
        Merit::new(Ratio::from_integer(1)).expect("1 is a valid merit")
    }

    pub fn value(&self) -> Rational {
        self.value
    }

    pub fn grant_probability(&self) -> Rational {
        self.grant_probability
    }

    /// Exact Bernoulli trial: grant iff `r / 2^64 < p`.
    fn grants(&self, r: u64) -> bool {
        let p = self.grant_probability;
        u128::from(r) * u128::from(*p.denom()) < u128::from(*p.numer()) << 64
    }
}

impl FromStr for Merit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Merit::new(parse_rational(s)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RationalRepr {
    Text(String),
    Number(serde_json::Number),
}

impl RationalRepr {
    fn parse(self) -> Result<Rational> {
        match self {
            RationalRepr::Text(s) => parse_rational(&s),
            RationalRepr::Number(n) => parse_rational(&n.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MeritRepr {
    Bare(RationalRepr),
    Full {
        value: RationalRepr,
        #[serde(default)]
        grant_probability: Option<RationalRepr>,
    },
}

impl Serialize for Merit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.value == self.grant_probability {
            return s.serialize_str(&self.value.to_string());
        }
        #[derive(Serialize)]
        struct Full {
            value: String,
            grant_probability: String,
        }
        Full {
            value: self.value.to_string(),
            grant_probability: self.grant_probability.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Merit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let merit = match MeritRepr::deserialize(d)? {
            MeritRepr::Bare(v) => v.parse().and_then(Merit::new),
            MeritRepr::Full {
                value,
                grant_probability,
            } => value.parse().and_then(|v| match grant_probability {
                Some(p) => Merit::with_probability(v, p.parse()?),
                None => Merit::new(v),
            }),
        };
        merit.map_err(D::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Token,
    Blank,
}

/// An infinite tape of token/blank cells, materialized lazily from a
/// counter-mode generator. Cell `i` depends only on the seed, the merit and `i`.
#[derive(Clone, Debug)]
pub struct Tape {
    seed: u64,
    merit: Merit,
    cursor: u64,
    rng: ChaCha8Rng,
}

impl Tape {
    pub fn new(seed: u64, merit: Merit) -> Self {
        Tape {
            seed,
            merit,
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn merit(&self) -> Merit {
        self.merit
    }

    /// Cells popped so far.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Random access to any cell without moving the head.
    pub fn cell(&self, index: u64) -> Cell {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(u128::from(index) * 2);
        self.classify(rng.next_u64())
    }

    pub fn pop(&mut self) -> Cell {
        self.cursor += 1;
        let r = self.rng.next_u64();
        self.classify(r)
    }

    fn classify(&self, r: u64) -> Cell {
        if self.merit.grants(r) {
            Cell::Token
        } else {
            Cell::Blank
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Token {
    pub parent: BlockId,
    pub bearer: ProcessId,
    pub nonce: u64,
}

/// Maximum number of blocks that may be validated for one parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capacity {
    Bounded(usize),
    Unbounded,
}

impl Capacity {
    pub fn admits(&self, current: usize) -> bool {
        match self {
            Capacity::Bounded(k) => current < *k,
            Capacity::Unbounded => true,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Bounded(k) => write!(f, "{k}"),
            Capacity::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Bounded(k) => s.serialize_u64(*k as u64),
            Capacity::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            K(usize),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::K(0) => Err(D::Error::custom("capacity must be at least 1")),
            Repr::K(k) => Ok(Capacity::Bounded(k)),
            Repr::Word(w) if w == "unbounded" => Ok(Capacity::Unbounded),
            Repr::Word(w) => Err(D::Error::custom(format!("unknown capacity {w:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Issue {
    parent: BlockId,
    bearer: ProcessId,
    block: BlockId,
}

/// Shared oracle state. One instance is the single authority for a run.
#[derive(Clone, Debug)]
pub struct OracleState {
    tapes: BTreeMap<ProcessId, Tape>,
    consumed: BTreeMap<BlockId, Vec<Block>>,
    capacity: Capacity,
    issued: BTreeMap<u64, Issue>,
    spent: BTreeSet<u64>,
    next_nonce: u64,
}

impl OracleState {
    pub fn new(capacity: Capacity) -> Self {
        OracleState {
            tapes: BTreeMap::new(),
            consumed: BTreeMap::new(),
            capacity,
            issued: BTreeMap::new(),
            spent: BTreeSet::new(),
            next_nonce: 0,
        }
    }

    pub fn frugal(k: usize) -> Self {
        OracleState::new(Capacity::Bounded(k))
    }

    pub fn prodigal() -> Self {
        OracleState::new(Capacity::Unbounded)
    }

    pub fn register(&mut self, process: ProcessId, merit: Merit, seed: u64) {
        self.tapes.insert(process, Tape::new(seed, merit));
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn tape(&self, process: &ProcessId) -> Option<&Tape> {
        self.tapes.get(process)
    }

    /// Pop one cell of the caller's tape; on a token, return the candidate
    /// stamped for `parent`.
    pub fn get_token(
        &mut self,
        parent: &BlockId,
        candidate: &Block,
        caller: &ProcessId,
    ) -> Result<Option<Block>> {
        let tape = self
            .tapes
            .get_mut(caller)
            .ok_or_else(|| Error::UnknownProcess(caller.clone()))?;
        if tape.pop() == Cell::Blank {
            return Ok(None);
        }
        let nonce = self.next_nonce;
        self.next_nonce += 1;
        self.issued.insert(
            nonce,
            Issue {
                parent: parent.clone(),
                bearer: caller.clone(),
                block: candidate.id.clone(),
            },
        );
        let mut stamped = candidate.clone();
        stamped.parent = Some(parent.clone());
        stamped.token = Some(Token {
            parent: parent.clone(),
            bearer: caller.clone(),
            nonce,
        });
        Ok(Some(stamped))
    }

    /// True iff the token was issued by this oracle for exactly this block
    /// and parent.
    pub fn is_issued(&self, stamped: &Block) -> bool {
        let Some(t) = &stamped.token else {
            return false;
        };
        self.issued.get(&t.nonce).is_some_and(|i| {
            i.parent == t.parent
                && i.bearer == t.bearer
                && i.block == stamped.id
                && stamped.parent.as_ref() == Some(&t.parent)
        })
    }

    pub fn is_spent(&self, nonce: u64) -> bool {
        self.spent.contains(&nonce)
    }

    /// Insert the stamped block into `K[h]` if genuine, unspent and below
    /// capacity. Always returns the resulting contents of `K[h]`.
    pub fn consume_token(&mut self, stamped: &Block) -> Vec<Block> {
        let Some(token) = &stamped.token else {
            return Vec::new();
        };
        let h = token.parent.clone();
        let genuine = self.is_issued(stamped) && !self.spent.contains(&token.nonce);
        let set = self.consumed.entry(h.clone()).or_default();
        if genuine && self.capacity.admits(set.len()) {
            set.push(stamped.clone());
            self.spent.insert(token.nonce);
        }
        self.consumed.get(&h).cloned().unwrap_or_default()
    }

    pub fn consumed(&self, parent: &BlockId) -> &[Block] {
        self.consumed.get(parent).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn consumed_sets(&self) -> &BTreeMap<BlockId, Vec<Block>> {
        &self.consumed
    }

    pub fn tokens_issued(&self) -> u64 {
        self.next_nonce
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pid(s: &str) -> ProcessId {
        ProcessId::from(s)
    }

    fn oracle_with(k: Capacity, merit: Merit) -> OracleState {
        let mut o = OracleState::new(k);
        o.register(pid("p"), merit, 42);
        o
    }

    #[test]
    fn rationals_parse() {
        assert_eq!(parse_rational("3/4").unwrap(), Ratio::new(3, 4));
        assert_eq!(parse_rational("0.25").unwrap(), Ratio::new(1, 4));
        assert_eq!(parse_rational("1").unwrap(), Ratio::from_integer(1));
        assert!(parse_rational("x").is_err());
        assert!(Merit::ratio(0, 1).is_err());
        assert!(Merit::ratio(3, 2).is_err());
    }

    #[test]
    fn merit_serde() {
        let m: Merit = serde_json::from_str("\"1/2\"").unwrap();
        assert_eq!(m.grant_probability(), Ratio::new(1, 2));
        let m: Merit = serde_json::from_str("0.5").unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "\"1/2\"");
        let m: Merit =
            serde_json::from_str(r#"{"value":"1/2","grant_probability":"1/8"}"#).unwrap();
        assert_eq!(m.grant_probability(), Ratio::new(1, 8));
        let back: Merit = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn full_merit_always_grants() {
        let mut t = Tape::new(1, Merit::full());
        assert!((0..1000).all(|_| t.pop() == Cell::Token));
    }

    #[test]
    fn sequential_pops_match_random_access() {
        let mut t = Tape::new(9, Merit::ratio(1, 3).unwrap());
        let cells: Vec<Cell> = (0..200).map(|i| t.cell(i)).collect();
        let popped: Vec<Cell> = (0..200).map(|_| t.pop()).collect();
        assert_eq!(cells, popped);
        assert_eq!(t.cursor(), 200);
    }

    #[test]
    fn get_token_advances_cursor_once() {
        let mut o = oracle_with(Capacity::Bounded(1), Merit::full());
        let b = o
            .get_token(&"b0".into(), &Block::new("x"), &pid("p"))
            .unwrap()
            .unwrap();
        assert_eq!(o.tape(&pid("p")).unwrap().cursor(), 1);
        assert_eq!(b.parent, Some("b0".into()));
        assert_eq!(b.token.as_ref().unwrap().parent, "b0".into());
        assert!(o
            .get_token(&"b0".into(), &Block::new("x"), &pid("q"))
            .is_err());
    }

    #[test]
    fn frugal_capacity_saturates_without_burning() {
        let mut o = oracle_with(Capacity::Bounded(1), Merit::full());
        let h: BlockId = "b0".into();
        let x = o
            .get_token(&h, &Block::new("x"), &pid("p"))
            .unwrap()
            .unwrap();
        let y = o
            .get_token(&h, &Block::new("y"), &pid("p"))
            .unwrap()
            .unwrap();
        assert_eq!(o.consume_token(&x), vec![x.clone()]);
        assert_eq!(o.consume_token(&y), vec![x.clone()]);
        let nonce = y.token.as_ref().unwrap().nonce;
        assert!(!o.is_spent(nonce));
        assert_eq!(o.consume_token(&x), vec![x]);
    }

    #[test]
    fn prodigal_accepts_every_genuine_token() {
        let mut o = oracle_with(Capacity::Unbounded, Merit::full());
        let h: BlockId = "b0".into();
        for i in 0..5 {
            let b = o
                .get_token(&h, &Block::new(format!("x{i}")), &pid("p"))
                .unwrap()
                .unwrap();
            o.consume_token(&b);
        }
        assert_eq!(o.consumed(&h).len(), 5);
    }

    #[test]
    fn forged_tokens_are_ignored() {
        let mut o = oracle_with(Capacity::Unbounded, Merit::full());
        let h: BlockId = "b0".into();
        let real = o
            .get_token(&h, &Block::new("x"), &pid("p"))
            .unwrap()
            .unwrap();
        let mut forged = real.clone();
        forged.id = "y".into();
        assert!(o.consume_token(&forged).is_empty());
        let mut invented = real.clone();
        invented.token.as_mut().unwrap().nonce = 999;
        assert!(o.consume_token(&invented).is_empty());
        assert_eq!(o.consume_token(&real).len(), 1);
    }

    #[test]
    fn capacity_serde() {
        assert_eq!(
            serde_json::from_str::<Capacity>("2").unwrap(),
            Capacity::Bounded(2)
        );
        assert_eq!(
            serde_json::from_str::<Capacity>("\"unbounded\"").unwrap(),
            Capacity::Unbounded
        );
        assert!(serde_json::from_str::<Capacity>("0").is_err());
    }
}
