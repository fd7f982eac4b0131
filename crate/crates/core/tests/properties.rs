use btlab_core::campaign::{hierarchy_history, random_scenario};
use btlab_core::netsim;
use btlab_core::oracle::Cell;
use btlab_core::{
    mcps, Block, BlockId, BlockTree, Capacity, Checker, History, Merit, OracleState, ProcessId,
    SelectionPolicy, Status, Tape,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_from(parents: &[usize]) -> BlockTree {
    let mut t = BlockTree::new();
    let mut ids = vec![BlockId::from("b0")];
    for (i, &p) in parents.iter().enumerate() {
        let id = BlockId::new(format!("n{i}"));
        t.insert(Block::new(id.clone()).with_parent(ids[p % ids.len()].clone()))
            .unwrap();
        ids.push(id);
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selected_chain_is_a_deepest_path(parents in prop::collection::vec(0usize..50, 0..40)) {
        let t = tree_from(&parents);
        let p = SelectionPolicy::default();
        let best = p.choose(&t);
        let deepest = t.leaves().map(|l| t.chain_to(l).unwrap().len()).max().unwrap();
        prop_assert_eq!(best.len(), deepest);
        prop_assert_eq!(t.chain_to(best.leaf().unwrap()).unwrap(), best);
    }

    #[test]
    fn mcps_is_symmetric_and_bounded(parents in prop::collection::vec(0usize..50, 1..40), a in 0usize..40, b in 0usize..40) {
        let t = tree_from(&parents);
        let ids: Vec<&BlockId> = t.blocks().map(|x| &x.id).collect();
        let ca = t.chain_to(ids[a % ids.len()]).unwrap();
        let cb = t.chain_to(ids[b % ids.len()]).unwrap();
        let p = SelectionPolicy::default();
        let m = mcps(&ca, &cb, &p).unwrap();
        prop_assert_eq!(m, mcps(&cb, &ca, &p).unwrap());
        prop_assert!(m >= 1 && m <= ca.len().min(cb.len()) as u64);
        prop_assert!(ca.common_prefix(&cb).is_prefix_of(&ca));
    }

    #[test]
    fn tree_json_round_trips(parents in prop::collection::vec(0usize..50, 0..30)) {
        let t = tree_from(&parents);
        prop_assert_eq!(BlockTree::from_json(&t.to_canonical_json()).unwrap(), t);
    }

    #[test]
    fn consumed_sets_respect_capacity(k in 1usize..4, picks in prop::collection::vec((0usize..4, 0usize..3), 1..40)) {
        let mut o = OracleState::frugal(k);
        for p in 0..4 {
            o.register(ProcessId::new(format!("p{p}")), Merit::full(), p as u64);
        }
        let parents = ["b0", "x", "y"];
        for (i, (p, h)) in picks.iter().enumerate() {
            let caller = ProcessId::new(format!("p{p}"));
            let b = o.get_token(&BlockId::from(parents[*h]), &Block::new(format!("c{i}")), &caller).unwrap().unwrap();
            let set = o.consume_token(&b);
            prop_assert!(set.len() <= k);
        }
        prop_assert!(o.consumed_sets().values().all(|s| s.len() <= k));
        prop_assert_eq!(o.capacity(), Capacity::Bounded(k));
    }

    #[test]
    fn tape_prefixes_are_stable(seed in any::<u64>(), n in 1u64..6, d in 6u64..12, idx in 0u64..500) {
        let t = Tape::new(seed, Merit::ratio(n, d).unwrap());
        prop_assert_eq!(t.cell(idx), t.cell(idx));
        let mut popped = Tape::new(seed, Merit::ratio(n, d).unwrap());
        let mut last = Cell::Blank;
        for _ in 0..=idx {
            last = popped.pop();
        }
        prop_assert_eq!(last, t.cell(idx));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn strong_never_passes_where_eventual_fails(root in any::<u64>(), index in 0u64..1000) {
        let (_, h, window) = hierarchy_history(root, index).unwrap();
        let c = Checker::with_window(window).unwrap();
        prop_assert!(!(c.sc(&h).status == Status::Pass && c.ec(&h).status == Status::Fail));
    }

    #[test]
    fn simulated_traces_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_scenario(&mut rng, seed);
        let out = netsim::run(&s).unwrap();
        let text = out.history.to_jsonl();
        let back = History::from_jsonl(&text).unwrap();
        prop_assert_eq!(back.events(), out.history.events());
    }
}
