use std::collections::BTreeMap;

use super::{Checker, Verdict};
use crate::history::{Event, EventKind, History, OpKind};
use crate::ids::{BlockId, ProcessId};

type Key = (BlockId, BlockId);

fn key(e: &Event) -> Option<Key> {
    Some((e.parent_id()?.clone(), e.block_id()?.clone()))
}

/// Transfer events at correct processes, grouped by kind and process.
struct Transfers {
    by: BTreeMap<(EventKind, ProcessId), BTreeMap<Key, Vec<usize>>>,
}

impl Transfers {
    fn new(h: &History) -> Self {
        let mut by: BTreeMap<(EventKind, ProcessId), BTreeMap<Key, Vec<usize>>> = BTreeMap::new();
        for (i, e) in h.events().iter().enumerate() {
            if !e.is_instant() || !h.is_correct(&e.process) {
                continue;
            }
            if let Some(k) = key(e) {
                by.entry((e.kind, e.process.clone()))
                    .or_default()
                    .entry(k)
                    .or_default()
                    .push(i);
            }
        }
        Transfers { by }
    }

    fn at(&self, kind: EventKind, p: &ProcessId, k: &Key) -> &[usize] {
        self.by
            .get(&(kind, p.clone()))
            .and_then(|m| m.get(k))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Who produced a block: its token bearer, else whoever invoked an append
/// of it, else its first sender, else its first updater.
fn originator(h: &History, block: &BlockId) -> Option<ProcessId> {
    let events = h.events();
    let mentions = |e: &&Event| e.block_id() == Some(block);
    if let Some(t) = events
        .iter()
        .filter(mentions)
        .find_map(|e| e.args.block.as_ref().and_then(|b| b.token.as_ref()))
    {
        return Some(t.bearer.clone());
    }
    let first = |pred: &dyn Fn(&Event) -> bool| {
        events
            .iter()
            .filter(mentions)
            .find(|e| pred(e))
            .map(|e| e.process.clone())
    };
    first(&|e| e.op == OpKind::Append && e.kind == EventKind::Invocation)
        .or_else(|| first(&|e| e.kind == EventKind::Send))
        .or_else(|| first(&|e| e.kind == EventKind::Update))
}

struct Findings {
    fail: Option<(Vec<u64>, String)>,
    open: Option<String>,
}

impl Findings {
    fn new() -> Self {
        Findings {
            fail: None,
            open: None,
        }
    }

    fn safety(&mut self, witness: Vec<u64>, detail: String) {
        self.fail.get_or_insert((witness, detail));
    }

    fn eventual(&mut self, complete: bool, witness: Vec<u64>, detail: String) {
        if complete {
            self.safety(witness, detail);
        } else {
            self.open.get_or_insert(detail);
        }
    }

    fn verdict(self, criterion: &str, checker: &Checker, h: &History) -> Verdict {
        let params = checker.params(h);
        match (self.fail, self.open) {
            (Some((w, d)), _) => Verdict::fail(criterion, params, w, d),
            (None, Some(d)) => Verdict::inconclusive(criterion, params, d),
            (None, None) => Verdict::pass(criterion, params),
        }
    }
}

impl Checker {
    pub fn update_agreement(&self, h: &History) -> Verdict {
        let t = Transfers::new(h);
        let mut f = Findings::new();
        let complete = h.is_complete();
        let mut origins: BTreeMap<BlockId, Option<ProcessId>> = BTreeMap::new();
        for (i, u) in h.events().iter().enumerate() {
            if u.kind != EventKind::Update || !h.is_correct(&u.process) {
                continue;
            }
            let Some(k) = key(u) else { continue };
            let origin = origins
                .entry(k.1.clone())
                .or_insert_with(|| originator(h, &k.1))
                .clone();
            let p = &u.process;
            let id = u.event_id;
            if origin.as_ref() == Some(p) {
                if t.at(EventKind::Send, p, &k).is_empty() {
                    f.eventual(
                        complete,
                        vec![id],
                        format!("R1: {p} updates {} but never sends it", k.1),
                    );
                }
            } else {
                let received_before = t
                    .at(EventKind::Receive, p, &k)
                    .iter()
                    .any(|&r| h.precedes(r, i));
                if !received_before {
                    f.safety(
                        vec![id],
                        format!("R2: {p} updates {} before receiving it", k.1),
                    );
                }
            }
            for q in h.correct() {
                if t.at(EventKind::Receive, q, &k).is_empty() {
                    f.eventual(
                        complete,
                        vec![id],
                        format!("R3: {q} never receives {}", k.1),
                    );
                }
            }
        }
        f.verdict("update-agreement", self, h)
    }

    pub fn lrc(&self, h: &History) -> Verdict {
        let t = Transfers::new(h);
        let mut f = Findings::new();
        let complete = h.is_complete();
        for e in h.events() {
            if !h.is_correct(&e.process) {
                continue;
            }
            let Some(k) = key(e) else { continue };
            match e.kind {
                EventKind::Send if t.at(EventKind::Receive, &e.process, &k).is_empty() => {
                    f.eventual(
                        complete,
                        vec![e.event_id],
                        format!(
                            "validity: {} sends {} but never receives it",
                            e.process, k.1
                        ),
                    );
                }
                EventKind::Receive => {
                    if let Some(q) = h
                        .correct()
                        .iter()
                        .find(|q| t.at(EventKind::Receive, q, &k).is_empty())
                    {
                        f.eventual(
                            complete,
                            vec![e.event_id],
                            format!(
                                "agreement: {} receives {} but {q} never does",
                                e.process, k.1
                            ),
                        );
                    }
                }
                _ => {}
            }
        }
        f.verdict("lrc", self, h)
    }
}
