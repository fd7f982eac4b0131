use std::collections::{BTreeMap, BTreeSet};

use super::{Checker, Verdict};
use crate::blocktree::Blockchain;
use crate::history::{History, OpKind, Returned};
use crate::ids::BlockId;

struct Read<'a> {
    op: usize,
    inv: usize,
    rsp: usize,
    chain: &'a Blockchain,
    score: u64,
}

impl Checker {
    fn reads<'a>(&self, h: &'a History) -> Vec<Read<'a>> {
        h.completed_reads()
            .into_iter()
            .filter(|(op, _)| h.is_correct(&h.ops()[*op].process))
            .map(|(op, chain)| Read {
                op,
                inv: h.ops()[op].invocation,
                rsp: h.ops()[op].response.expect("completed"),
                chain,
                score: self.score.score(chain),
            })
            .collect()
    }

    /// Indices into `reads` of the last `w` reads of every correct process.
    fn trailing(&self, h: &History, reads: &[Read]) -> Vec<usize> {
        let mut per_process: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, r) in reads.iter().enumerate() {
            per_process
                .entry(&h.ops()[r.op].process)
                .or_default()
                .push(i);
        }
        let w = self.window.get() as usize;
        let mut out = Vec::new();
        for mut list in per_process.into_values() {
            list.sort_by_key(|&i| reads[i].inv);
            let skip = list.len().saturating_sub(w);
            out.extend_from_slice(&list[skip..]);
        }
        out.sort_unstable();
        out
    }

    /// Window reads that start after `r` has returned.
    fn window_after(&self, h: &History, reads: &[Read], window: &[usize], r: usize) -> Vec<usize> {
        window
            .iter()
            .copied()
            .filter(|&x| x != r && h.precedes(reads[r].rsp, reads[x].inv))
            .collect()
    }

    fn ids(h: &History, events: &[usize]) -> Vec<u64> {
        events.iter().map(|&i| h.events()[i].event_id).collect()
    }

    pub fn block_validity(&self, h: &History) -> Verdict {
        let params = self.params(h);
        let genesis = h.genesis();
        let mut appends: BTreeMap<&BlockId, Vec<usize>> = BTreeMap::new();
        for op in h.ops().iter().filter(|op| op.kind == OpKind::Append) {
            let answered_false = op
                .response
                .is_some_and(|r| h.events()[r].returned == Some(Returned::Bool(false)));
            if !answered_false {
                if let Some(b) = h.events()[op.invocation].block_id() {
                    appends.entry(b).or_default().push(op.invocation);
                }
            }
        }
        for r in self.reads(h) {
            let witness = Self::ids(h, &[r.inv, r.rsp]);
            if r.chain.genesis() != Some(&genesis) {
                return Verdict::fail(
                    "block-validity",
                    params,
                    witness.clone(),
                    format!("read e{} does not start at genesis {genesis}", witness[1]),
                );
            }
            for b in &r.chain.ids()[1..] {
                let appended_before = appends
                    .get(b)
                    .is_some_and(|invs| invs.iter().any(|&inv| h.precedes(inv, r.rsp)));
                if !appended_before {
                    return Verdict::fail(
                        "block-validity",
                        params,
                        witness.clone(),
                        format!(
                            "read e{} returns {b}, which no prior valid append introduced",
                            witness[1]
                        ),
                    );
                }
            }
        }
        Verdict::pass("block-validity", params)
    }

    pub fn local_monotonic_read(&self, h: &History) -> Verdict {
        let params = self.params(h);
        let reads = self.reads(h);
        let mut per_process: BTreeMap<_, Vec<&Read>> = BTreeMap::new();
        for r in &reads {
            per_process
                .entry(&h.ops()[r.op].process)
                .or_default()
                .push(r);
        }
        for (p, mut list) in per_process {
            list.sort_by_key(|r| r.inv);
            for pair in list.windows(2) {
                if pair[1].score < pair[0].score {
                    let witness =
                        Self::ids(h, &[pair[0].inv, pair[0].rsp, pair[1].inv, pair[1].rsp]);
                    return Verdict::fail(
                        "local-monotonic-read",
                        params,
                        witness,
                        format!("{p} reads score {} then {}", pair[0].score, pair[1].score),
                    );
                }
            }
        }
        Verdict::pass("local-monotonic-read", params)
    }

    /// Reports the earliest (by response) read that is incomparable with an
    /// earlier one.
    pub fn strong_prefix(&self, h: &History) -> Verdict {
        let params = self.params(h);
        let reads = self.reads(h);
        let mut seen: Vec<(&Blockchain, usize)> = Vec::new();
        let mut distinct: BTreeSet<&Blockchain> = BTreeSet::new();
        for (i, r) in reads.iter().enumerate() {
            for &(chain, j) in &seen {
                if !chain.is_prefix_of(r.chain) && !r.chain.is_prefix_of(chain) {
                    let other = &reads[j];
                    let witness = Self::ids(h, &[other.inv, other.rsp, r.inv, r.rsp]);
                    return Verdict::fail(
                        "strong-prefix",
                        params,
                        witness,
                        format!("{} and {} are not prefix-comparable", other.chain, r.chain),
                    );
                }
            }
            if distinct.insert(r.chain) {
                seen.push((r.chain, i));
            }
        }
        Verdict::pass("strong-prefix", params)
    }

    /// Every read's score must be exceeded by all trailing reads that start
    /// after it. A complete history whose top score is already reached by
    /// every trailing read is accepted as stable.
    pub fn ever_growing_tree(&self, h: &History) -> Verdict {
        let params = self.params(h);
        let reads = self.reads(h);
        let window = self.trailing(h, &reads);
        let top = reads.iter().map(|r| r.score).max().unwrap_or(0);
        for (i, r) in reads.iter().enumerate() {
            let after = self.window_after(h, &reads, &window, i);
            let Some(&stale) = after.iter().find(|&&x| reads[x].score <= r.score) else {
                continue;
            };
            let stable = h.is_complete()
                && r.score == top
                && after.iter().all(|&x| reads[x].score >= r.score);
            if !stable {
                return Verdict::inconclusive(
                    "ever-growing-tree",
                    params,
                    format!(
                        "score {} of read e{} is not exceeded by trailing read e{}",
                        r.score,
                        h.events()[r.rsp].event_id,
                        h.events()[reads[stale].rsp].event_id
                    ),
                );
            }
        }
        Verdict::pass("ever-growing-tree", params)
    }

    /// For every read of score `s`, trailing reads that start after it must
    /// pairwise share a prefix of score at least `s`.
    pub fn eventual_prefix(&self, h: &History) -> Verdict {
        let params = self.params(h);
        let reads = self.reads(h);
        let window = self.trailing(h, &reads);
        let mut pending = None;
        for (i, r) in reads.iter().enumerate() {
            let after = self.window_after(h, &reads, &window, i);
            for (x, &a) in after.iter().enumerate() {
                for &b in &after[x + 1..] {
                    let common = self
                        .score
                        .score(&reads[a].chain.common_prefix(reads[b].chain));
                    if common >= r.score {
                        continue;
                    }
                    let detail = format!(
                        "after read e{} (score {}), {} and {} share only score {common}",
                        h.events()[r.rsp].event_id,
                        r.score,
                        reads[a].chain,
                        reads[b].chain
                    );
                    if h.is_complete() {
                        let ev = [
                            r.inv,
                            r.rsp,
                            reads[a].inv,
                            reads[a].rsp,
                            reads[b].inv,
                            reads[b].rsp,
                        ];
                        return Verdict::fail("eventual-prefix", params, Self::ids(h, &ev), detail);
                    }
                    pending.get_or_insert(detail);
                }
            }
        }
        match pending {
            Some(detail) => Verdict::inconclusive("eventual-prefix", params, detail),
            None => Verdict::pass("eventual-prefix", params),
        }
    }
}
