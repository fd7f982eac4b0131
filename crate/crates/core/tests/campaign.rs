use btlab_core::campaign::{self, random_schedule};
use btlab_core::refinement::execute_schedule;
use btlab_core::{Capacity, Merit, ProcessId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn empty_campaigns_pass() {
    let h = campaign::hierarchy(0, 1).unwrap();
    assert_eq!(h.histories, 0);
    assert!(h.ok());
    assert!(campaign::kfork(2, 0, 1).unwrap().ok());
    assert!(campaign::containment(0, 1).unwrap().ok());
    let c = campaign::consensus(0, 1, 4, 1, 10).unwrap();
    assert!(c.ok());
}

#[test]
fn campaigns_are_reproducible() {
    assert_eq!(
        campaign::hierarchy(60, 4).unwrap(),
        campaign::hierarchy(60, 4).unwrap()
    );
    assert_eq!(
        campaign::kfork(2, 30, 4).unwrap(),
        campaign::kfork(2, 30, 4).unwrap()
    );
    assert_eq!(
        campaign::consensus(30, 4, 4, 1, 1000).unwrap(),
        campaign::consensus(30, 4, 4, 1, 1000).unwrap()
    );
}

#[test]
fn small_hierarchy_corpus_has_no_counterexample() {
    let r = campaign::hierarchy(200, 99).unwrap();
    assert!(r.ok(), "{:?}", r.sc_pass_ec_fail);
    assert!(r.ec_fail > 0, "mutations produce failures");
}

#[test]
fn exhaustion_is_flagged_not_hidden() {
    let r = campaign::consensus(20, 5, 4, 1, 1).unwrap();
    assert!(r.exhausted > 0);
    assert_eq!(r.agreement, 20);
    assert!(r.ok());
}

#[test]
fn small_equivalences() {
    assert!(campaign::cas_equivalence(2, 2).unwrap().ok());
    let s = campaign::snapshot_equivalence(2).unwrap();
    assert_eq!(s.interleavings, 6);
    assert!(s.ok());
}

#[test]
fn schedules_issue_every_append() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let procs: Vec<ProcessId> = ["a", "b", "c"].map(ProcessId::from).to_vec();
    let steps = random_schedule(&mut rng, &procs, 3, 0.5);
    let appends = steps
        .iter()
        .filter(|s| matches!(s, btlab_core::refinement::Step::Append { .. }))
        .count();
    assert_eq!(appends, 9);
    let with_merit: Vec<(ProcessId, Merit)> =
        procs.into_iter().map(|p| (p, Merit::full())).collect();
    let run = execute_schedule(&with_merit, Capacity::Unbounded, 1, &steps).unwrap();
    assert_eq!(run.successes.len(), 9);
}
