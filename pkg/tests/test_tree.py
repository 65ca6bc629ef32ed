import pytest
from hypothesis import given, settings

from conftest import datasets, product_dataset, two_situation_tree
from stagedmpc.data import Dataset
from stagedmpc.tree import (Edge, EventTree, Hyperstage, TreeError, build_event_tree,
                            validate_hyperstage, variable_hyperstage)


def test_product_tree_shape_and_numbering():
    ds = product_dataset([2, 3], [1, 2, 3, 4, 5, 6], names=["A", "B"])
    t = build_event_tree(ds)
    t.check()
    assert t.n_nodes == 1 + 2 + 6
    assert t.situations == (0, 1, 2)
    assert t.leaves == tuple(range(3, 9))
    assert t.counts(0) == (6, 15)
    assert t.counts(1) == (1, 2, 3) and t.counts(2) == (4, 5, 6)
    assert t.path(8) == ("a1", "b2")
    assert t.variables == {0: "A", 1: "B", 2: "B"}


def test_order_changes_tree():
    ds = product_dataset([2, 3], [1, 2, 3, 4, 5, 6], names=["A", "B"])
    t = build_event_tree(ds, ["B", "A"])
    assert t.labels(0) == ("b0", "b1", "b2")
    assert t.counts(0) == (5, 7, 9)
    with pytest.raises(TreeError):
        build_event_tree(ds, ["A"])
    with pytest.raises(TreeError):
        build_event_tree(ds, ["A", "A"])


def test_prune_zeros_drops_paths():
    ds = product_dataset([2, 2], [0, 0, 3, 1], names=["A", "B"])
    full = build_event_tree(ds)
    pruned = build_event_tree(ds, prune_zeros=True)
    assert len(full.leaves) == 4 and len(pruned.leaves) == 2
    assert pruned.labels(0) == ("a1",)
    pruned.check()


def test_empty_dataset_builds_zero_tree():
    ds = Dataset.from_records(["A", "B"], [], schema={"A": ("p", "q"), "B": ("x", "y")})
    t = build_event_tree(ds)
    assert t.total == 0 and len(t.leaves) == 4
    with pytest.raises(TreeError):
        build_event_tree(ds, prune_zeros=True)
    with pytest.raises(TreeError):
        build_event_tree(Dataset.from_records(["A"], []))


def test_check_detects_broken_flow():
    t = EventTree(3, {0: (Edge("a", 1, 2),), 1: (Edge("x", 2, 1),)}, {0: "A", 1: "B"})
    with pytest.raises(TreeError, match="flow"):
        t.check()
    dup = EventTree(3, {0: (Edge("a", 1, 1), Edge("a", 2, 1))})
    with pytest.raises(TreeError, match="duplicate"):
        dup.check()


def test_variable_hyperstage_and_validation():
    ds = product_dataset([2, 2, 2], list(range(8)), names=["A", "B", "C"])
    t = build_event_tree(ds)
    h = variable_hyperstage(t)
    assert h.names == ("A", "B", "C")
    assert h.sizes() == [1, 2, 4]
    assert validate_hyperstage(t, h)
    bad = validate_hyperstage(t, Hyperstage(((0,), (1, 2), (3, 4, 5))))
    assert not bad and bad.nodes == (6,)
    overlap = validate_hyperstage(t, Hyperstage(((0, 1), (1, 2), (3, 4, 5, 6))))
    assert not overlap and "hypersets" in overlap.message
    mixed = validate_hyperstage(t, Hyperstage(((0, 1), (2,), (3, 4, 5, 6))))
    assert not mixed.ok and "signature" in mixed.message


def test_signature_mismatch_reported():
    t = two_situation_tree()
    r = validate_hyperstage(t, Hyperstage(((0, 1),)))
    assert not r.ok and r.nodes == (0, 1)


def test_split_signatures_for_pruned_trees():
    ds = product_dataset([2, 2], [0, 4, 3, 1], names=["A", "B"])
    t = build_event_tree(ds, prune_zeros=True)
    with pytest.raises(TreeError):
        variable_hyperstage(t)
    h = variable_hyperstage(t, split_signatures=True)
    assert h.names == ("A", "B[b1]", "B[b0,b1]")
    assert validate_hyperstage(t, h)


@settings(max_examples=40, deadline=None)
@given(datasets())
def test_random_trees_are_consistent(ds):
    t = build_event_tree(ds)
    t.check()
    assert t.total == ds.total
    assert len(t.leaves) == len(ds.rows)
    assert sorted(t.leaves) == sorted(leaf for s in [0] for leaf in t.leaf_descendants[s])
    # rebuilding gives the identical canonical tree
    assert build_event_tree(ds) == t
