import pytest
from hypothesis import given, settings

from conftest import datasets, product_dataset
from stagedmpc.fixtures import chds_synthetic
from stagedmpc.resize import (binary_resize, contract, default_policy, residual_label,
                              transport_prior)
from stagedmpc.scoring import check_prior, leaf_path_prior, saturated_score
from stagedmpc.tree import (SpecLeaf, SpecNode, TreeError, build_event_tree, canonical_tree,
                            variable_hyperstage)


def three_way():
    # root a/b/c with 2, 2 and 3 leaves below
    def leaves(k, c):
        return SpecNode("Y", [(f"y{i}", c, SpecLeaf()) for i in range(k)])
    return canonical_tree(SpecNode("X", [("a", 4, leaves(2, 2)), ("b", 2, leaves(2, 1)),
                                         ("c", 3, leaves(3, 1))]))


def test_three_edge_floret_becomes_chain():
    t = three_way()
    b, rmap = binary_resize(t)
    b.check()
    assert b.is_binary
    assert b.labels(0) == ("a", residual_label(["b", "c"])) == ("a", "Other(b,c)")
    assert b.counts(0) == (4, 5)
    rest = b.edges[0][1].child
    assert b.labels(rest) == ("b", "c") and b.counts(rest) == (2, 3)
    assert b.variables[0] == "X" and b.variables[rest] == "X-rest"
    # the three-leaf Y floret under c is split too
    assert (0, 1) in rmap.residual and len(rmap.residual) == 2
    assert rmap.situation_images(0) == [0, rest]


def test_prior_transport_on_chain():
    t = three_way()
    prior = leaf_path_prior(t)
    assert prior.edge_alpha[0] == (2.0, 2.0, 3.0)
    b, rmap = binary_resize(t)
    bp = transport_prior(prior, rmap)
    assert bp.edge_alpha[0] == (2.0, 5.0)
    assert bp.edge_alpha[b.edges[0][1].child] == (2.0, 3.0)
    check_prior(b, bp)
    assert saturated_score(b, bp) == pytest.approx(saturated_score(t, prior), abs=1e-9)


def test_policy_changes_chain_order():
    t = three_way()
    b, rmap = binary_resize(t, {"X": ("c", "a", "b")})
    assert b.labels(0) == ("c", "Other(a,b)")
    assert rmap.split_order[0] == ("c", "a", "b")
    with pytest.raises(TreeError, match="does not cover"):
        binary_resize(t, {"X": ("a", "b")})


def test_binary_tree_is_fixed_point():
    t = build_event_tree(product_dataset([2, 2], [1, 2, 3, 4]))
    b, rmap = binary_resize(t)
    assert b == t and rmap.is_identity and not rmap.residual


def test_outcome_paths_survive():
    t = three_way()
    b, rmap = binary_resize(t)
    for leaf, image in rmap.leaf_map.items():
        assert rmap.outcome_path(image) == t.path(leaf)


def test_chds_high_first_gives_five_levels():
    t = build_event_tree(chds_synthetic())
    b, _ = binary_resize(t, {"L": ("High", "Average", "Low")})
    h = variable_hyperstage(b)
    assert h.names == ("S", "E", "H", "L", "L-rest")
    assert h.sizes() == [1, 2, 4, 8, 8]
    assert all(b.labels(s) == ("High", "Other(Average,Low)") for s in h.hypersets[3])
    assert len(b.leaves) == len(t.leaves) == 24


def test_default_policy_first_appearance():
    t = build_event_tree(product_dataset([3, 2], [1] * 6, names=["A", "B"]))
    assert default_policy(t) == {"A": ("a0", "a1", "a2"), "B": ("b0", "b1")}


@settings(max_examples=60, deadline=None)
@given(datasets(max_vars=4, max_levels=4, max_count=50))
def test_round_trip_and_score_equivalence(ds):
    t = build_event_tree(ds)
    b, rmap = binary_resize(t)
    assert contract(b, rmap) == t
    prior = leaf_path_prior(t)
    assert saturated_score(b, transport_prior(prior, rmap)) == pytest.approx(
        saturated_score(t, prior), abs=1e-9)


def test_contract_rejects_foreign_tree():
    _, rmap = binary_resize(three_way())
    other = build_event_tree(product_dataset([2, 2], [1, 2, 3, 4]))
    with pytest.raises(TreeError):
        contract(other, rmap)
