//! Concurrent histories and the orders defined over their events.
//!
//! `send`, `receive` and `update` events are instantaneous: each one is both
//! the invocation and the response of its own operation. Program order is
//! the transitive closure of process order and operation order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::blocktree::{Block, Blockchain, GENESIS_ID};
use crate::error::{Error, Result};
use crate::ids::{BlockId, ProcessId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Invocation,
    Response,
    Send,
    Receive,
    Update,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Append,
    Read,
    Send,
    Receive,
    Update,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Args {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<BlockId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Returned {
    Bool(bool),
    Chain(Blockchain),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub event_id: u64,
    pub kind: EventKind,
    pub op: OpKind,
    #[serde(default)]
    pub args: Args,
    pub process: ProcessId,
    pub logical_time: u64,
    #[serde(default)]
    pub returned: Option<Returned>,
}

impl Event {
    pub fn invoke_read(event_id: u64, process: impl Into<ProcessId>, t: u64) -> Self {
        Event {
            event_id,
            kind: EventKind::Invocation,
            op: OpKind::Read,
            args: Args::default(),
            process: process.into(),
            logical_time: t,
            returned: None,
        }
    }

    pub fn read_returns(
        event_id: u64,
        process: impl Into<ProcessId>,
        t: u64,
        chain: Blockchain,
    ) -> Self {
        Event {
            event_id,
            kind: EventKind::Response,
            op: OpKind::Read,
            args: Args::default(),
            process: process.into(),
            logical_time: t,
            returned: Some(Returned::Chain(chain)),
        }
    }

    pub fn invoke_append(
        event_id: u64,
        process: impl Into<ProcessId>,
        t: u64,
        block: Block,
    ) -> Self {
        Event {
            event_id,
            kind: EventKind::Invocation,
            op: OpKind::Append,
            args: Args {
                parent: None,
                block: Some(block),
            },
            process: process.into(),
            logical_time: t,
            returned: None,
        }
    }

    pub fn append_returns(event_id: u64, process: impl Into<ProcessId>, t: u64, ok: bool) -> Self {
        Event {
            event_id,
            kind: EventKind::Response,
            op: OpKind::Append,
            args: Args::default(),
            process: process.into(),
            logical_time: t,
            returned: Some(Returned::Bool(ok)),
        }
    }

    /// A `send`, `receive` or `update` event for `block` with parent `parent`.
    pub fn transfer(
        event_id: u64,
        kind: EventKind,
        process: impl Into<ProcessId>,
        t: u64,
        parent: impl Into<BlockId>,
        block: Block,
    ) -> Self {
        let op = match kind {
            EventKind::Send => OpKind::Send,
            EventKind::Receive => OpKind::Receive,
            EventKind::Update => OpKind::Update,
            _ => panic!("transfer events are send, receive or update"),
        };
        Event {
            event_id,
            kind,
            op,
            args: Args {
                parent: Some(parent.into()),
                block: Some(block),
            },
            process: process.into(),
            logical_time: t,
            returned: None,
        }
    }

    pub fn is_instant(&self) -> bool {
        matches!(
            self.kind,
            EventKind::Send | EventKind::Receive | EventKind::Update
        )
    }

    fn invocation_like(&self) -> bool {
        self.kind == EventKind::Invocation || self.is_instant()
    }

    fn response_like(&self) -> bool {
        self.kind == EventKind::Response || self.is_instant()
    }

    pub fn block_id(&self) -> Option<&BlockId> {
        self.args.block.as_ref().map(|b| &b.id)
    }

    /// Parent named by a transfer event: explicit, else the block's own.
    pub fn parent_id(&self) -> Option<&BlockId> {
        self.args
            .parent
            .as_ref()
            .or_else(|| self.args.block.as_ref().and_then(|b| b.parent.as_ref()))
    }

    pub fn chain(&self) -> Option<&Blockchain> {
        match &self.returned {
            Some(Returned::Chain(c)) => Some(c),
            _ => None,
        }
    }
}

/// An invocation matched with its response, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operation {
    pub process: ProcessId,
    pub kind: OpKind,
    pub invocation: usize,
    pub response: Option<usize>,
}

#[derive(Clone, Debug, Default)]
struct ProcessLine {
    events: Vec<usize>,
    invocation_like: Vec<usize>,
    invocation_times: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct History {
    events: Vec<Event>,
    processes: BTreeSet<ProcessId>,
    correct: BTreeSet<ProcessId>,
    complete: bool,
    ops: Vec<Operation>,
    op_of: Vec<usize>,
    pos: Vec<usize>,
    exit: Vec<Option<u64>>,
    lines: BTreeMap<ProcessId, ProcessLine>,
    index: HashMap<u64, usize>,
}

impl PartialEq for History {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events
            && self.processes == other.processes
            && self.correct == other.correct
            && self.complete == other.complete
    }
}

impl History {
    pub fn empty() -> Self {
        History::record(Vec::new()).expect("empty history is well formed")
    }

    /// Validate an event stream and index it. Events are put into canonical
    /// order (logical time, then event id).
    pub fn record(mut events: Vec<Event>) -> Result<Self> {
        events.sort_by_key(|e| (e.logical_time, e.event_id));
        let mut index = HashMap::with_capacity(events.len());
        let mut processes = BTreeSet::new();
        let mut ops: Vec<Operation> = Vec::new();
        let mut op_of = Vec::with_capacity(events.len());
        let mut pending: HashMap<(ProcessId, OpKind), usize> = HashMap::new();
        let malformed = |e: &Event, reason: &str| Error::MalformedHistory {
            event_id: e.event_id,
            reason: reason.to_owned(),
        };
        for (i, e) in events.iter().enumerate() {
            if index.insert(e.event_id, i).is_some() {
                return Err(malformed(e, "duplicate event id"));
            }
            processes.insert(e.process.clone());
            match e.kind {
                EventKind::Invocation => {
                    if !matches!(e.op, OpKind::Append | OpKind::Read) {
                        return Err(malformed(e, "only append and read are invoked"));
                    }
                    if e.op == OpKind::Append && e.args.block.is_none() {
                        return Err(malformed(e, "append invocation without a block"));
                    }
                    if e.returned.is_some() {
                        return Err(malformed(e, "invocation carries a return value"));
                    }
                    let key = (e.process.clone(), e.op);
                    // Append responses are dropped by restriction, so an
                    // unanswered append may be followed by another one.
                    if e.op == OpKind::Read && pending.contains_key(&key) {
                        return Err(malformed(e, "read invoked while another read is pending"));
                    }
                    pending.insert(key, ops.len());
                    op_of.push(ops.len());
                    ops.push(Operation {
                        process: e.process.clone(),
                        kind: e.op,
                        invocation: i,
                        response: None,
                    });
                }
                EventKind::Response => {
                    let typed = matches!(
                        (e.op, &e.returned),
                        (OpKind::Read, Some(Returned::Chain(_)))
                            | (OpKind::Append, Some(Returned::Bool(_)))
                    );
                    if !typed {
                        return Err(malformed(e, "response value does not match the operation"));
                    }
                    let op = pending
                        .remove(&(e.process.clone(), e.op))
                        .ok_or_else(|| malformed(e, "response without a matching invocation"))?;
                    ops[op].response = Some(i);
                    op_of.push(op);
                }
                EventKind::Send | EventKind::Receive | EventKind::Update => {
                    let expected = match e.kind {
                        EventKind::Send => OpKind::Send,
                        EventKind::Receive => OpKind::Receive,
                        _ => OpKind::Update,
                    };
                    if e.op != expected {
                        return Err(malformed(e, "event kind and operation disagree"));
                    }
                    if e.args.block.is_none() || e.parent_id().is_none() {
                        return Err(malformed(e, "transfer event needs a block and a parent"));
                    }
                    if e.returned.is_some() {
                        return Err(malformed(e, "transfer event carries a return value"));
                    }
                    op_of.push(ops.len());
                    ops.push(Operation {
                        process: e.process.clone(),
                        kind: e.op,
                        invocation: i,
                        response: Some(i),
                    });
                }
            }
        }

        let mut lines: BTreeMap<ProcessId, ProcessLine> = BTreeMap::new();
        let mut pos = vec![0; events.len()];
        for (i, e) in events.iter().enumerate() {
            let line = lines.entry(e.process.clone()).or_default();
            pos[i] = line.events.len();
            line.events.push(i);
            if e.invocation_like() {
                line.invocation_like.push(i);
                line.invocation_times.push(e.logical_time);
            }
        }
        let mut exit = vec![None; events.len()];
        for line in lines.values() {
            let mut next = None;
            for &i in line.events.iter().rev() {
                if events[i].response_like() {
                    next = Some(events[i].logical_time);
                }
                exit[i] = next;
            }
        }
        let correct = processes.clone();
        Ok(History {
            events,
            processes,
            correct,
            complete: false,
            ops,
            op_of,
            pos,
            exit,
            lines,
            index,
        })
    }

    /// Add processes that take no steps. Processes appearing in events are
    /// always members.
    pub fn with_processes(mut self, processes: impl IntoIterator<Item = ProcessId>) -> Self {
        for p in processes {
            self.correct.insert(p.clone());
            self.processes.insert(p);
        }
        self
    }

    pub fn with_correct(mut self, correct: impl IntoIterator<Item = ProcessId>) -> Result<Self> {
        let correct: BTreeSet<ProcessId> = correct.into_iter().collect();
        if let Some(p) = correct.iter().find(|p| !self.processes.contains(*p)) {
            return Err(Error::Config(format!(
                "correct process {p} is not a member"
            )));
        }
        self.correct = correct;
        Ok(self)
    }

    pub fn declared_complete(mut self, complete: bool) -> Self {
        self.complete = complete;
        self
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn processes(&self) -> &BTreeSet<ProcessId> {
        &self.processes
    }

    pub fn correct(&self) -> &BTreeSet<ProcessId> {
        &self.correct
    }

    pub fn is_correct(&self, p: &ProcessId) -> bool {
        self.correct.contains(p)
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn ops(&self) -> &[Operation] {
        &self.ops
    }

    pub fn event_index(&self, event_id: u64) -> Option<usize> {
        self.index.get(&event_id).copied()
    }

    pub fn event_by_id(&self, event_id: u64) -> Option<&Event> {
        self.event_index(event_id).map(|i| &self.events[i])
    }

    pub fn op_of_event(&self, index: usize) -> usize {
        self.op_of[index]
    }

    /// Event indices of `p`, in process order.
    pub fn process_events(&self, p: &ProcessId) -> &[usize] {
        self.lines
            .get(p)
            .map(|l| l.events.as_slice())
            .unwrap_or(&[])
    }

    /// Genesis as seen by the first read, `b0` when nothing was read.
    pub fn genesis(&self) -> BlockId {
        self.events
            .iter()
            .find_map(|e| e.chain().and_then(|c| c.genesis().cloned()))
            .unwrap_or_else(|| BlockId::from(GENESIS_ID))
    }

    /// Completed reads as `(operation index, returned chain)`, in response
    /// order.
    pub fn completed_reads(&self) -> Vec<(usize, &Blockchain)> {
        let mut reads: Vec<(usize, &Blockchain)> = self
            .ops
            .iter()
            .enumerate()
            .filter(|(_, op)| op.kind == OpKind::Read)
            .filter_map(|(i, op)| op.response.map(|r| (i, r)))
            .filter_map(|(i, r)| self.events[r].chain().map(|c| (i, c)))
            .collect();
        reads.sort_by_key(|(i, _)| self.ops[*i].response);
        reads
    }

    /// `a ↗ b` over event indices.
    pub fn precedes(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let (ea, eb) = (&self.events[a], &self.events[b]);
        if ea.process == eb.process {
            return self.pos[a] < self.pos[b];
        }
        let Some(exit) = self.exit[a] else {
            return false;
        };
        let line = &self.lines[&eb.process];
        let first = line.invocation_times.partition_point(|&t| t <= exit);
        line.invocation_like
            .get(first)
            .is_some_and(|&y| self.pos[y] <= self.pos[b])
    }

    /// Program order as explicit pairs of event ids.
    pub fn program_order(&self) -> BTreeSet<(u64, u64)> {
        let mut pairs = BTreeSet::new();
        for a in 0..self.events.len() {
            for b in 0..self.events.len() {
                if self.precedes(a, b) {
                    pairs.insert((self.events[a].event_id, self.events[b].event_id));
                }
            }
        }
        pairs
    }

    /// Completed reads whose response follows the response of `read` in
    /// program order (the read itself excluded). Returns operation indices.
    pub fn reads_after(&self, read: usize) -> Result<Vec<usize>> {
        let op = self
            .ops
            .get(read)
            .filter(|op| op.kind == OpKind::Read)
            .ok_or_else(|| Error::OperationNotFound(format!("read #{read}")))?;
        let rsp = op
            .response
            .ok_or_else(|| Error::OperationNotFound(format!("read #{read} has no response")))?;
        Ok(self
            .completed_reads()
            .into_iter()
            .map(|(i, _)| i)
            .filter(|&i| i != read && self.precedes(rsp, self.ops[i].response.expect("completed")))
            .collect())
    }

    /// Restrict to the events visible under the Byzantine model: reads and
    /// transfers at correct processes, and append invocations whose block is
    /// valid (not answered false). Append responses are dropped.
    pub fn restricted(&self) -> History {
        let keep: Vec<Event> = self
            .events
            .iter()
            .enumerate()
            .filter(|(i, e)| match e.op {
                OpKind::Read => self.is_correct(&e.process),
                OpKind::Append => {
                    e.kind == EventKind::Invocation && !self.answered_false(self.op_of[*i])
                }
                _ => self.is_correct(&e.process),
            })
            .map(|(_, e)| e.clone())
            .collect();
        self.rebuild(keep)
    }

    fn answered_false(&self, op: usize) -> bool {
        self.ops[op]
            .response
            .is_some_and(|r| self.events[r].returned == Some(Returned::Bool(false)))
    }

    /// The sub-history on the given event ids, keeping processes, correct set
    /// and completeness. Responses whose invocation is not kept are dropped.
    pub fn subhistory(&self, event_ids: &BTreeSet<u64>) -> History {
        let keep: Vec<Event> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| event_ids.contains(&e.event_id))
            .filter(|(i, e)| {
                e.kind != EventKind::Response
                    || event_ids
                        .contains(&self.events[self.ops[self.op_of[*i]].invocation].event_id)
            })
            .map(|(_, e)| e.clone())
            .collect();
        self.rebuild(keep)
    }

    fn rebuild(&self, events: Vec<Event>) -> History {
        History::record(events)
            .expect("sub-streams of well-formed histories are well formed")
            .with_processes(self.processes.iter().cloned())
            .with_correct(self.correct.iter().cloned())
            .expect("same membership")
            .declared_complete(self.complete)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<History> {
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: Event = serde_json::from_str(line).map_err(|err| Error::TraceParse {
                line: n + 1,
                reason: err.to_string(),
            })?;
            events.push(e);
        }
        History::record(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(ids: &[&str]) -> Blockchain {
        ids.iter().copied().collect()
    }

    fn read(id: u64, p: &str, inv: u64, rsp: u64, c: &[&str]) -> [Event; 2] {
        [
            Event::invoke_read(id, p, inv),
            Event::read_returns(id + 1, p, rsp, chain(c)),
        ]
    }

    #[test]
    fn empty_and_single_operation() {
        assert!(History::empty().is_empty());
        let h = History::record(read(1, "p1", 1, 2, &["b0"]).to_vec()).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.program_order(), BTreeSet::from([(1, 2)]));
    }

    #[test]
    fn real_time_order_across_processes() {
        let mut ev = read(1, "p", 1, 3, &["b0"]).to_vec();
        ev.extend(read(3, "q", 5, 6, &["b0"]));
        let h = History::record(ev).unwrap();
        assert!(h.program_order().contains(&(2, 3)));
        assert!(h.program_order().contains(&(1, 4)));
    }

    #[test]
    fn overlapping_operations_are_unordered() {
        let ev = vec![
            Event::invoke_read(1, "p", 1),
            Event::invoke_read(2, "q", 2),
            Event::read_returns(3, "p", 3, chain(&["b0"])),
            Event::read_returns(4, "q", 4, chain(&["b0"])),
        ];
        let h = History::record(ev).unwrap();
        assert_eq!(h.program_order(), BTreeSet::from([(1, 3), (2, 4)]));
    }

    #[test]
    fn rejects_malformed_streams() {
        let err =
            History::record(vec![Event::read_returns(7, "p", 1, chain(&["b0"]))]).unwrap_err();
        assert!(matches!(err, Error::MalformedHistory { event_id: 7, .. }));
        let dup = vec![Event::invoke_read(1, "p", 1), Event::invoke_read(1, "q", 2)];
        assert!(History::record(dup).is_err());
        let twice = vec![Event::invoke_read(1, "p", 1), Event::invoke_read(2, "p", 2)];
        assert!(History::record(twice).is_err());
    }

    #[test]
    fn reads_after_excludes_overlap_and_self() {
        let mut ev = read(1, "p", 1, 2, &["b0"]).to_vec();
        ev.extend(read(3, "q", 2, 4, &["b0"]));
        ev.extend(read(5, "p", 5, 6, &["b0"]));
        let h = History::record(ev).unwrap();
        let reads = h.completed_reads();
        assert_eq!(h.reads_after(reads[0].0).unwrap(), vec![reads[2].0]);
        assert!(h.reads_after(reads[2].0).unwrap().is_empty());
        assert!(h.reads_after(99).is_err());
    }

    #[test]
    fn restriction_is_idempotent() {
        let ev = vec![
            Event::invoke_append(1, "p", 1, Block::new("x")),
            Event::append_returns(2, "p", 2, true),
            Event::invoke_append(3, "p", 3, Block::new("y")),
            Event::append_returns(4, "p", 4, false),
            Event::transfer(5, EventKind::Send, "byz", 5, "b0", Block::new("x")),
            Event::invoke_read(6, "byz", 6),
            Event::read_returns(7, "byz", 7, chain(&["b0"])),
        ];
        let h = History::record(ev)
            .unwrap()
            .with_correct(["p".into()])
            .unwrap();
        let r = h.restricted();
        let ids: Vec<u64> = r.events().iter().map(|e| e.event_id).collect();
        assert_eq!(ids, vec![1]);
        assert_eq!(r.restricted(), r);
        assert_eq!(r.processes().len(), 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut ev = read(1, "p", 1, 2, &["b0", "x"]).to_vec();
        ev.push(Event::invoke_append(3, "p", 3, Block::new("x")));
        ev.push(Event::append_returns(4, "p", 4, true));
        ev.push(Event::transfer(
            5,
            EventKind::Update,
            "p",
            5,
            "b0",
            Block::new("x"),
        ));
        let h = History::record(ev).unwrap();
        let text = h.to_jsonl();
        assert!(text.starts_with(
            r#"{"event_id":1,"kind":"INVOCATION","op":"read","args":{},"process":"p","logical_time":1,"returned":null}"#
        ));
        let back = History::from_jsonl(&text).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.to_jsonl(), text);
        assert!(matches!(
            History::from_jsonl("{\"event_id\":1}\n"),
            Err(Error::TraceParse { line: 1, .. })
        ));
    }
}
