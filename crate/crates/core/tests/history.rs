use std::collections::{BTreeSet, VecDeque};

use btlab_core::campaign::random_scenario;
use btlab_core::history::Returned;
use btlab_core::netsim::{self, figures};
use btlab_core::{Block, Blockchain, Event, EventKind, History, OpKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn response_like(e: &Event) -> bool {
    e.kind == EventKind::Response || e.is_instant()
}

fn invocation_like(e: &Event) -> bool {
    e.kind == EventKind::Invocation || e.is_instant()
}

/// Transitive closure of per-process order plus response-before-invocation
/// real-time edges, by breadth-first search from every event.
fn closure(h: &History) -> BTreeSet<(usize, usize)> {
    let ev = h.events();
    let n = ev.len();
    let mut adj = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let same = ev[a].process == ev[b].process;
            let later = (ev[a].logical_time, ev[a].event_id) < (ev[b].logical_time, ev[b].event_id);
            if (same && later)
                || (!same
                    && response_like(&ev[a])
                    && invocation_like(&ev[b])
                    && ev[a].logical_time < ev[b].logical_time)
            {
                adj[a].push(b);
            }
        }
    }
    let mut out = BTreeSet::new();
    for s in 0..n {
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    out.insert((s, y));
                    q.push_back(y);
                }
            }
        }
    }
    out.retain(|(a, b)| a != b);
    out
}

fn assert_matches_closure(h: &History) {
    let want = closure(h);
    for a in 0..h.len() {
        for b in 0..h.len() {
            assert_eq!(
                h.precedes(a, b),
                want.contains(&(a, b)),
                "events {a} -> {b}"
            );
        }
    }
}

#[test]
fn precedence_matches_closure_on_figures() {
    for n in 3..=6 {
        assert_matches_closure(&History::record(figures::figure(n).unwrap()).unwrap());
    }
}

#[test]
fn precedence_matches_closure_on_simulated_runs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for i in 0..25 {
        let mut s = random_scenario(&mut rng, i);
        s.sim_mut().unwrap().duration = 20;
        let h = netsim::run(&s).unwrap().history;
        assert_matches_closure(&h);
        assert_matches_closure(&h.restricted());
    }
}

#[test]
fn reads_after_follows_response_order() {
    let h = History::record(figures::figure_3()).unwrap();
    let reads: Vec<usize> = h.completed_reads().into_iter().map(|(op, _)| op).collect();
    assert_eq!(reads.len(), 6);
    let after_first = h.reads_after(reads[0]).unwrap();
    assert_eq!(after_first, reads[1..].to_vec());
    let overlapping = h.reads_after(reads[2]).unwrap();
    assert_eq!(
        overlapping,
        reads[4..].to_vec(),
        "the concurrent read of j is excluded"
    );
    assert!(h.reads_after(reads[5]).unwrap().is_empty());
    let append = h
        .ops()
        .iter()
        .position(|op| op.kind == OpKind::Append)
        .unwrap();
    assert!(h.reads_after(append).is_err());
}

#[test]
fn malformed_streams_are_rejected() {
    let chain: Blockchain = ["b0"].into_iter().collect();
    let orphan = vec![Event::read_returns(1, "i", 1, chain.clone())];
    assert!(History::record(orphan).is_err());

    let dup = vec![
        Event::invoke_read(1, "i", 1),
        Event::read_returns(1, "i", 2, chain.clone()),
    ];
    assert!(History::record(dup).is_err());

    let overlapping = vec![Event::invoke_read(1, "i", 1), Event::invoke_read(2, "i", 2)];
    assert!(History::record(overlapping).is_err());

    let mut wrong = Event::read_returns(2, "i", 2, chain);
    wrong.returned = Some(Returned::Bool(true));
    assert!(History::record(vec![Event::invoke_read(1, "i", 1), wrong]).is_err());
}

#[test]
fn jsonl_round_trip() {
    for n in 3..=6 {
        let h = History::record(figures::figure(n).unwrap())
            .unwrap()
            .declared_complete(true);
        let text = h.to_jsonl();
        assert_eq!(text.lines().count(), h.len());
        let back = History::from_jsonl(&text).unwrap();
        assert_eq!(back.events(), h.events());
        assert_eq!(back.to_jsonl(), text);
    }
    assert!(History::from_jsonl("").unwrap().is_empty());
    let err = History::from_jsonl("{\"event_id\": 1}\n").unwrap_err();
    assert!(err.to_string().contains("line 1"), "{err}");
}

#[test]
fn restriction_keeps_only_visible_events() {
    let events = vec![
        Event::invoke_append(1, "i", 1, Block::new("x")),
        Event::append_returns(2, "i", 2, true),
        Event::invoke_append(3, "j", 3, Block::new("y")),
        Event::append_returns(4, "j", 4, false),
        Event::invoke_read(5, "z", 5),
        Event::read_returns(6, "z", 6, ["b0", "x"].into_iter().collect()),
        Event::invoke_read(7, "i", 7),
        Event::read_returns(8, "i", 8, ["b0", "x"].into_iter().collect()),
    ];
    let h = History::record(events)
        .unwrap()
        .with_correct(["i", "j"].map(Into::into))
        .unwrap();
    let r = h.restricted();
    let kept: Vec<u64> = r.events().iter().map(|e| e.event_id).collect();
    assert_eq!(kept, vec![1, 7, 8]);
    assert!(r.processes().contains(&"z".into()));
}

#[test]
fn subhistory_drops_orphaned_responses() {
    let h = History::record(figures::figure_3()).unwrap();
    let keep: BTreeSet<u64> = [1, 2, 6, 7, 8].into_iter().collect();
    let s = h.subhistory(&keep);
    let kept: Vec<u64> = s.events().iter().map(|e| e.event_id).collect();
    assert_eq!(kept, vec![1, 2, 7, 8]);
}

#[test]
fn unknown_correct_process_is_an_error() {
    let h = History::record(figures::figure_3()).unwrap();
    assert!(h.with_correct(["ghost".into()]).is_err());
}
