use btlab_core::refinement::{execute_schedule, max_fork_count, merge_trees, Step};
use btlab_core::{
    fork_count, AppendOutcome, Block, BlockId, Capacity, Merit, OracleState, ProcessId,
    RefinedLedger,
};

fn pid(s: &str) -> ProcessId {
    ProcessId::from(s)
}

fn setup(capacity: Capacity, merit: Merit) -> OracleState {
    let mut o = OracleState::new(capacity);
    o.register(pid("p"), merit, 1);
    o.register(pid("q"), merit, 2);
    o
}

#[test]
fn refined_append_stamps_and_concatenates() {
    let mut o = setup(Capacity::Bounded(1), Merit::ratio(1, 2).unwrap());
    let mut l = RefinedLedger::default();
    let out = l
        .refined_append(&mut o, Block::new("x"), &pid("p"))
        .unwrap();
    let AppendOutcome::Appended { block, attempts } = out else {
        panic!("{out:?}");
    };
    assert!(attempts >= 1);
    assert_eq!(block.parent, Some(BlockId::from("b0")));
    assert!(o.is_issued(&block));
    assert_eq!(l.read().to_string(), "b0^x");
}

#[test]
fn second_token_on_same_parent_is_rejected_under_k1() {
    let mut o = setup(Capacity::Bounded(1), Merit::full());
    let mut lp = RefinedLedger::default();
    let mut lq = RefinedLedger::default();
    assert!(lp
        .refined_append(&mut o, Block::new("x"), &pid("p"))
        .unwrap()
        .succeeded());
    let out = lq
        .refined_append(&mut o, Block::new("y"), &pid("q"))
        .unwrap();
    match out {
        AppendOutcome::Rejected { holders, .. } => assert_eq!(holders[0].id, BlockId::from("x")),
        other => panic!("{other:?}"),
    }
    assert_eq!(lq.read().len(), 1);
}

#[test]
fn exhaustion_and_invalid_candidates() {
    let mut o = OracleState::frugal(1);
    o.register(pid("p"), Merit::ratio(1, 1_000_000).unwrap(), 3);
    let mut l = RefinedLedger::default().with_max_grant_attempts(5);
    let out = l
        .refined_append(&mut o, Block::new("x"), &pid("p"))
        .unwrap();
    assert!(out.is_exhausted());
    assert_eq!(out.attempts(), 5);

    let mut o = setup(Capacity::Unbounded, Merit::full());
    let mut l = RefinedLedger::default();
    l.refined_append(&mut o, Block::new("x"), &pid("p"))
        .unwrap();
    assert_eq!(
        l.refined_append(&mut o, Block::new("x"), &pid("p"))
            .unwrap(),
        AppendOutcome::Invalid
    );
    let mut stamped = Block::new("z");
    stamped.token = l.tree().get(&BlockId::from("x")).unwrap().token.clone();
    assert!(l.refined_append(&mut o, stamped, &pid("p")).is_err());
}

#[test]
fn receive_buffers_orphans() {
    let mut o = setup(Capacity::Unbounded, Merit::full());
    let mut src = RefinedLedger::default();
    src.refined_append(&mut o, Block::new("x"), &pid("p"))
        .unwrap();
    src.refined_append(&mut o, Block::new("y"), &pid("p"))
        .unwrap();
    let x = src.tree().get(&BlockId::from("x")).unwrap().clone();
    let y = src.tree().get(&BlockId::from("y")).unwrap().clone();

    let mut dst = RefinedLedger::default();
    assert!(dst.receive(y.clone()).is_empty());
    assert_eq!(dst.orphan_count(), 1);
    let inserted: Vec<BlockId> = dst.receive(x).into_iter().map(|b| b.id).collect();
    assert_eq!(inserted, vec![BlockId::from("x"), BlockId::from("y")]);
    assert_eq!(dst.orphan_count(), 0);
    assert!(dst.receive(y).is_empty());
    assert_eq!(dst.read(), src.read());
    assert!(dst
        .receive(Block::new("untokened").with_parent("b0"))
        .is_empty());
}

#[test]
fn schedule_under_prodigal_oracle_forks() {
    let procs = vec![
        (pid("p"), Merit::full()),
        (pid("q"), Merit::full()),
        (pid("r"), Merit::full()),
    ];
    let steps: Vec<Step> = ["p", "q", "r"]
        .iter()
        .map(|p| Step::Append {
            caller: pid(p),
            block: BlockId::new(format!("{p}-1")),
        })
        .collect();
    let run = execute_schedule(&procs, Capacity::Unbounded, 1, &steps).unwrap();
    assert_eq!(max_fork_count(&run.union_tree()), 3);
    let run = execute_schedule(&procs, Capacity::Bounded(2), 1, &steps).unwrap();
    let union = run.union_tree();
    assert_eq!(fork_count(&union, &BlockId::from("b0")).unwrap(), 2);
    assert_eq!(run.successes.len(), 2);
    assert_eq!(run.purged(&steps).len(), 2);
}

#[test]
fn deliveries_resolve_forks() {
    let procs = vec![(pid("p"), Merit::full()), (pid("q"), Merit::full())];
    let steps = vec![
        Step::Append {
            caller: pid("p"),
            block: BlockId::from("p-1"),
        },
        Step::Deliver {
            to: pid("q"),
            block: BlockId::from("p-1"),
        },
        Step::Append {
            caller: pid("q"),
            block: BlockId::from("q-1"),
        },
    ];
    let run = execute_schedule(&procs, Capacity::Bounded(1), 9, &steps).unwrap();
    assert_eq!(run.successes.len(), 2);
    assert_eq!(run.successes[1].parent, BlockId::from("p-1"));
    let merged = merge_trees(run.replicas.values().map(|l| l.tree()));
    assert_eq!(max_fork_count(&merged), 1);
}
