//! The sequential BlockTree object.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ids::BlockId;
use crate::oracle::Token;
use crate::policy::SelectionPolicy;

pub const GENESIS_ID: &str = "b0";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<BlockId>,
    #[serde(default, with = "hex_payload", skip_serializing_if = "Vec::is_empty")]
    pub payload: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<Token>,
}

impl Block {
    /// A block with no parent yet; `append` decides where it goes.
    pub fn new(id: impl Into<BlockId>) -> Self {
        Block {
            id: id.into(),
            parent: None,
            payload: Vec::new(),
            token: None,
        }
    }

    pub fn genesis() -> Self {
        Block::new(GENESIS_ID)
    }

    pub fn with_parent(mut self, parent: impl Into<BlockId>) -> Self {
        self.parent = Some(parent.into());
        self
    }

    pub fn with_payload(mut self, payload: impl Into<Vec<u8>>) -> Self {
        self.payload = payload.into();
        self
    }
}

mod hex_payload {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// A path from genesis to some block, genesis first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Blockchain(Vec<BlockId>);

impl Blockchain {
    pub fn new(ids: Vec<BlockId>) -> Self {
        Blockchain(ids)
    }

    pub fn genesis_only(genesis: BlockId) -> Self {
        Blockchain(vec![genesis])
    }

    pub fn ids(&self) -> &[BlockId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn genesis(&self) -> Option<&BlockId> {
        self.0.first()
    }

    pub fn leaf(&self) -> Option<&BlockId> {
        self.0.last()
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.0.contains(id)
    }

    pub fn is_prefix_of(&self, other: &Blockchain) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Longest common initial segment.
    pub fn common_prefix(&self, other: &Blockchain) -> Blockchain {
        let n = self
            .0
            .iter()
            .zip(&other.0)
            .take_while(|(a, b)| a == b)
            .count();
        Blockchain(self.0[..n].to_vec())
    }

    pub fn extended(&self, id: BlockId) -> Blockchain {
        let mut ids = self.0.clone();
        ids.push(id);
        Blockchain(ids)
    }
}

impl<S: Into<BlockId>> FromIterator<S> for Blockchain {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Blockchain(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for Blockchain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(BlockId::as_str).collect();
        f.write_str(&parts.join("^"))
    }
}

/// Rooted tree of blocks, stored by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockTree {
    root: BlockId,
    blocks: BTreeMap<BlockId, Block>,
    children: BTreeMap<BlockId, BTreeSet<BlockId>>,
}

impl Default for BlockTree {
    fn default() -> Self {
        BlockTree::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        BlockTree::with_genesis(Block::genesis())
    }

    pub fn with_genesis(mut genesis: Block) -> Self {
        genesis.parent = None;
        let root = genesis.id.clone();
        let mut blocks = BTreeMap::new();
        blocks.insert(root.clone(), genesis);
        let mut children = BTreeMap::new();
        children.insert(root.clone(), BTreeSet::new());
        BlockTree {
            root,
            blocks,
            children,
        }
    }

    pub fn root(&self) -> &BlockId {
        &self.root
    }

    pub fn get(&self, id: &BlockId) -> Option<&Block> {
        self.blocks.get(id)
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.blocks.contains_key(id)
    }

    /// Number of blocks including genesis.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub fn children(&self, id: &BlockId) -> Option<&BTreeSet<BlockId>> {
        self.children.get(id)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BlockId> {
        self.children
            .iter()
            .filter(|(_, c)| c.is_empty())
            .map(|(id, _)| id)
    }

    /// Chain from genesis to `id`.
    pub fn chain_to(&self, id: &BlockId) -> Option<Blockchain> {
        let mut ids = Vec::new();
        let mut cur = self.blocks.get(id)?;
        loop {
            ids.push(cur.id.clone());
            match &cur.parent {
                Some(p) => cur = self.blocks.get(p)?,
                None => break,
            }
        }
        ids.reverse();
        Some(Blockchain(ids))
    }

    /// Structural insertion: the parent must exist and the id must be fresh.
    /// Policy-level validity is the caller's business.
    pub fn insert(&mut self, block: Block) -> Result<()> {
        if self.blocks.contains_key(&block.id) {
            return Err(Error::DuplicateBlock(block.id));
        }
        let parent = block
            .parent
            .clone()
            .ok_or_else(|| Error::MissingParent(block.id.clone()))?;
        let siblings = self
            .children
            .get_mut(&parent)
            .ok_or_else(|| Error::UnknownBlock(parent.clone()))?;
        siblings.insert(block.id.clone());
        self.children.insert(block.id.clone(), BTreeSet::new());
        self.blocks.insert(block.id.clone(), block);
        Ok(())
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    root: BlockId,
    blocks: Vec<Block>,
}

impl Serialize for BlockTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TreeDoc {
            root: self.root.clone(),
            blocks: self.blocks.values().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BlockTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = TreeDoc::deserialize(d)?;
        let mut pending: BTreeMap<BlockId, Block> = BTreeMap::new();
        let mut genesis = None;
        for block in doc.blocks {
            if block.id == doc.root {
                genesis = Some(block);
            } else if pending.insert(block.id.clone(), block).is_some() {
                return Err(D::Error::custom("duplicate block id"));
            }
        }
        let genesis = genesis.ok_or_else(|| D::Error::custom("root block missing"))?;
        if genesis.parent.is_some() {
            return Err(D::Error::custom("root block has a parent"));
        }
        let mut tree = BlockTree::with_genesis(genesis);
        while !pending.is_empty() {
            let ready: Vec<BlockId> = pending
                .values()
                .filter(|b| b.parent.as_ref().is_some_and(|p| tree.contains(p)))
                .map(|b| b.id.clone())
                .collect();
            if ready.is_empty() {
                return Err(D::Error::custom("blocks unreachable from root"));
            }
            for id in ready {
                let block = pending.remove(&id).expect("ready block is pending");
                tree.insert(block).map_err(D::Error::custom)?;
            }
        }
        Ok(tree)
    }
}

/// The BlockTree state machine: a tree plus the policy that drives it.
#[derive(Clone, Debug)]
pub struct BlockTreeAdt {
    tree: BlockTree,
    policy: SelectionPolicy,
}

impl Default for BlockTreeAdt {
    fn default() -> Self {
        BlockTreeAdt::new(SelectionPolicy::default())
    }
}

impl BlockTreeAdt {
    pub fn new(policy: SelectionPolicy) -> Self {
        BlockTreeAdt {
            tree: BlockTree::new(),
            policy,
        }
    }

    pub fn from_tree(tree: BlockTree, policy: SelectionPolicy) -> Self {
        BlockTreeAdt { tree, policy }
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn policy(&self) -> &SelectionPolicy {
        &self.policy
    }

    /// Attach `block` to the leaf of the selected chain if it is valid there.
    pub fn append(&mut self, mut block: Block) -> bool {
        let leaf = self.read().leaf().cloned().expect("chains are never empty");
        block.parent = Some(leaf);
        if !self.policy.is_valid(&block, &self.tree) {
            return false;
        }
        self.tree.insert(block).is_ok()
    }

    pub fn read(&self) -> Blockchain {
        self.policy.choose(&self.tree)
    }
}

pub fn score(chain: &Blockchain, policy: &SelectionPolicy) -> u64 {
    policy.score(chain)
}

/// Score of the maximal common prefix.
pub fn mcps(a: &Blockchain, b: &Blockchain, policy: &SelectionPolicy) -> Result<u64> {
    match (a.genesis(), b.genesis()) {
        (Some(ga), Some(gb)) if ga != gb => Err(Error::GenesisMismatch(ga.clone(), gb.clone())),
        _ => Ok(policy.score(&a.common_prefix(b))),
    }
}

pub fn is_prefix(a: &Blockchain, b: &Blockchain) -> bool {
    a.is_prefix_of(b)
}
