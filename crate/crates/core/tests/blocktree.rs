use btlab_core::blocktree::GENESIS_ID;
use btlab_core::{
    is_prefix, mcps, score, Block, BlockId, BlockTree, BlockTreeAdt, Blockchain, Error,
    SelectionPolicy,
};

fn chain(ids: &[&str]) -> Blockchain {
    ids.iter().map(|s| BlockId::from(*s)).collect()
}

fn forked() -> BlockTree {
    let mut t = BlockTree::new();
    for (id, parent) in [("a", "b0"), ("b", "a"), ("c", "b0"), ("d", "c"), ("e", "d")] {
        t.insert(Block::new(id).with_parent(parent)).unwrap();
    }
    t
}

#[test]
fn fresh_tree_reads_genesis() {
    let adt = BlockTreeAdt::new(SelectionPolicy::default());
    assert_eq!(adt.read(), chain(&[GENESIS_ID]));
    assert_eq!(score(&adt.read(), adt.policy()), 1);
}

#[test]
fn append_extends_the_selected_chain() {
    let mut adt = BlockTreeAdt::new(SelectionPolicy::default());
    assert!(adt.append(Block::new("x")));
    assert!(adt.append(Block::new("y")));
    assert_eq!(adt.read(), chain(&["b0", "x", "y"]));
    assert!(!adt.append(Block::new("x")), "duplicate ids are invalid");
    assert_eq!(adt.tree().len(), 3);
}

#[test]
fn longest_chain_wins_and_ties_go_to_largest_leaf() {
    let adt = BlockTreeAdt::from_tree(forked(), SelectionPolicy::default());
    assert_eq!(adt.read(), chain(&["b0", "c", "d", "e"]));

    let mut t = BlockTree::new();
    t.insert(Block::new("p").with_parent("b0")).unwrap();
    t.insert(Block::new("q").with_parent("b0")).unwrap();
    assert_eq!(SelectionPolicy::default().choose(&t), chain(&["b0", "q"]));
}

#[test]
fn inserts_reject_structural_errors() {
    let mut t = forked();
    assert!(matches!(
        t.insert(Block::new("a").with_parent("b0")),
        Err(Error::DuplicateBlock(_))
    ));
    assert!(matches!(
        t.insert(Block::new("z").with_parent("nope")),
        Err(Error::UnknownBlock(_))
    ));
    assert!(matches!(
        t.insert(Block::new("root2")),
        Err(Error::MissingParent(_))
    ));
    assert_eq!(t.len(), 6);
}

#[test]
fn mcps_and_prefix() {
    let p = SelectionPolicy::default();
    let a = chain(&["b0", "a", "b"]);
    let c = chain(&["b0", "c", "d"]);
    assert_eq!(mcps(&a, &c, &p).unwrap(), 1);
    assert_eq!(mcps(&a, &a, &p).unwrap(), 3);
    assert!(is_prefix(&chain(&["b0", "a"]), &a));
    assert!(!is_prefix(&c, &a));
    assert!(mcps(&a, &chain(&["g", "a"]), &p).is_err());
}

#[test]
fn json_round_trip_is_canonical() {
    let t = forked();
    let text = t.to_canonical_json();
    let back = BlockTree::from_json(&text).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_canonical_json(), text);
    assert_eq!(
        back.chain_to(&BlockId::from("e")),
        Some(chain(&["b0", "c", "d", "e"]))
    );
}

#[test]
fn malformed_json_is_rejected() {
    assert!(
        BlockTree::from_json("{\"root\":\"b0\",\"blocks\":[{\"id\":\"x\",\"parent\":\"y\"}]}")
            .is_err()
    );
    assert!(BlockTree::from_json("not json").is_err());
}
