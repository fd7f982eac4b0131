//! Chain selection, scoring and block validity.

use std::fmt;
use std::sync::Arc;

use crate::blocktree::{Block, BlockTree, Blockchain};

pub trait ScoreFn: fmt::Debug + Send + Sync {
    /// Must be strictly monotone under one-block extension.
    fn score(&self, chain: &Blockchain) -> u64;
}

pub trait ChainChooser: fmt::Debug + Send + Sync {
    fn choose(&self, tree: &BlockTree, score: &dyn ScoreFn) -> Blockchain;
}

pub trait BlockValidity: fmt::Debug + Send + Sync {
    /// `block.parent` is already set to the attachment point.
    fn is_valid(&self, block: &Block, tree: &BlockTree) -> bool;
}

/// Number of blocks, genesis included.
#[derive(Clone, Copy, Debug, Default)]
pub struct LengthScore;

impl ScoreFn for LengthScore {
    fn score(&self, chain: &Blockchain) -> u64 {
        chain.len() as u64
    }
}

/// Highest score wins; ties go to the lexicographically largest leaf id.
#[derive(Clone, Copy, Debug, Default)]
pub struct LongestChain;

impl ChainChooser for LongestChain {
    fn choose(&self, tree: &BlockTree, score: &dyn ScoreFn) -> Blockchain {
        let mut best: Option<(u64, Blockchain)> = None;
        for leaf in tree.leaves() {
            let chain = tree.chain_to(leaf).expect("leaves are reachable");
            let s = score.score(&chain);
            let better = match &best {
                None => true,
                Some((bs, bc)) => s > *bs || (s == *bs && chain.leaf() > bc.leaf()),
            };
            if better {
                best = Some((s, chain));
            }
        }
        best.map(|(_, c)| c)
            .unwrap_or_else(|| Blockchain::genesis_only(tree.root().clone()))
    }
}

/// Fresh id, known parent, and a token (when present or required) that was
/// issued for that parent.
#[derive(Clone, Copy, Debug, Default)]
pub struct StructuralValidity {
    pub require_token: bool,
}

impl BlockValidity for StructuralValidity {
    fn is_valid(&self, block: &Block, tree: &BlockTree) -> bool {
        let Some(parent) = &block.parent else {
            return false;
        };
        if tree.contains(&block.id) || !tree.contains(parent) {
            return false;
        }
        match &block.token {
            Some(t) => &t.parent == parent,
            None => !self.require_token,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelectionPolicy {
    chooser: Arc<dyn ChainChooser>,
    score: Arc<dyn ScoreFn>,
    validity: Arc<dyn BlockValidity>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            chooser: Arc::new(LongestChain),
            score: Arc::new(LengthScore),
            validity: Arc::new(StructuralValidity::default()),
        }
    }
}

impl SelectionPolicy {
    /// Default policy for oracle-driven ledgers: every block needs a token.
    pub fn tokenized() -> Self {
        SelectionPolicy::default().with_validity(StructuralValidity {
            require_token: true,
        })
    }

    pub fn with_chooser(mut self, chooser: impl ChainChooser + 'static) -> Self {
        self.chooser = Arc::new(chooser);
        self
    }

    pub fn with_score(mut self, score: impl ScoreFn + 'static) -> Self {
        self.score = Arc::new(score);
        self
    }

    pub fn with_validity(mut self, validity: impl BlockValidity + 'static) -> Self {
        self.validity = Arc::new(validity);
        self
    }

    pub fn choose(&self, tree: &BlockTree) -> Blockchain {
        self.chooser.choose(tree, self.score.as_ref())
    }

    pub fn score(&self, chain: &Blockchain) -> u64 {
        self.score.score(chain)
    }

    pub fn score_fn(&self) -> &dyn ScoreFn {
        self.score.as_ref()
    }

    pub fn is_valid(&self, block: &Block, tree: &BlockTree) -> bool {
        self.validity.is_valid(block, tree)
    }
}
