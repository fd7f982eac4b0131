//! Fixed event scripts for the four depicted histories.

use crate::blocktree::{Block, Blockchain};
use crate::history::{Event, EventKind};

struct Script {
    events: Vec<Event>,
    t: u64,
}

impl Script {
    fn new() -> Self {
        Script {
            events: Vec::new(),
            t: 0,
        }
    }

    fn next(&mut self) -> u64 {
        self.t += 1;
        self.t
    }

    fn append(&mut self, p: &str, block: &str) -> &mut Self {
        let t = self.next();
        self.events
            .push(Event::invoke_append(t, p, t, Block::new(block)));
        let t = self.next();
        self.events.push(Event::append_returns(t, p, t, true));
        self
    }

    fn inv(&mut self, p: &str) -> &mut Self {
        let t = self.next();
        self.events.push(Event::invoke_read(t, p, t));
        self
    }

    fn rsp(&mut self, p: &str, chain: &[&str]) -> &mut Self {
        let t = self.next();
        let chain: Blockchain = chain.iter().copied().collect();
        self.events.push(Event::read_returns(t, p, t, chain));
        self
    }

    fn read(&mut self, p: &str, chain: &[&str]) -> &mut Self {
        self.inv(p).rsp(p, chain)
    }

    fn transfer(&mut self, kind: EventKind, p: &str, parent: &str, block: &str) -> &mut Self {
        let t = self.next();
        let b = Block::new(block).with_parent(parent);
        self.events.push(Event::transfer(t, kind, p, t, parent, b));
        self
    }

    fn done(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }
}

/// Strong-consistent: every read is a prefix of the single growing chain.
pub fn figure_3() -> Vec<Event> {
    Script::new()
        .append("i", "1")
        .append("i", "2")
        .read("i", &["b0", "1", "2"])
        .read("j", &["b0", "1"])
        .append("i", "3")
        .inv("i")
        .inv("j")
        .rsp("i", &["b0", "1", "2", "3"])
        .rsp("j", &["b0", "1", "2"])
        .append("j", "4")
        .inv("i")
        .inv("j")
        .rsp("i", &["b0", "1", "2", "3", "4"])
        .rsp("j", &["b0", "1", "2", "3", "4"])
        .done()
}

/// Early reads split between two branches; the last reads agree.
pub fn figure_4() -> Vec<Event> {
    Script::new()
        .append("j", "1")
        .append("i", "2")
        .append("i", "4")
        .read("i", &["b0", "2", "4"])
        .read("j", &["b0", "1"])
        .append("j", "3")
        .read("i", &["b0", "2", "4"])
        .read("j", &["b0", "1", "3"])
        .append("j", "5")
        .inv("i")
        .inv("j")
        .rsp("i", &["b0", "1", "3", "5"])
        .rsp("j", &["b0", "1", "3", "5"])
        .done()
}

/// The two branches keep growing apart.
pub fn figure_5() -> Vec<Event> {
    Script::new()
        .append("j", "1")
        .append("i", "2")
        .append("i", "4")
        .read("i", &["b0", "2", "4"])
        .read("j", &["b0", "1"])
        .append("j", "3")
        .read("i", &["b0", "2", "4"])
        .read("j", &["b0", "1", "3"])
        .append("i", "6")
        .append("j", "5")
        .inv("i")
        .inv("j")
        .rsp("i", &["b0", "2", "4", "6"])
        .rsp("j", &["b0", "1", "3", "5"])
        .done()
}

/// One block sent by `i` and received everywhere; `i` applies it before its
/// own copy comes back.
pub fn figure_6() -> Vec<Event> {
    Script::new()
        .transfer(EventKind::Send, "i", "b0", "b")
        .transfer(EventKind::Update, "i", "b0", "b")
        .transfer(EventKind::Receive, "i", "b0", "b")
        .transfer(EventKind::Receive, "j", "b0", "b")
        .transfer(EventKind::Receive, "k", "b0", "b")
        .transfer(EventKind::Update, "j", "b0", "b")
        .transfer(EventKind::Update, "k", "b0", "b")
        .done()
}

pub fn figure(n: u8) -> Option<Vec<Event>> {
    match n {
        3 => Some(figure_3()),
        4 => Some(figure_4()),
        5 => Some(figure_5()),
        6 => Some(figure_6()),
        _ => None,
    }
}
