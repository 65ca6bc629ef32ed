import pytest
from hypothesis import given, settings

from conftest import datasets
from stagedmpc.export import export_json, import_json, recompact, to_ceg
from stagedmpc.resize import binary_resize, transport_prior
from stagedmpc.scoring import leaf_path_prior, model_score
from stagedmpc.selection import ahc, exact_map, mpc, replay
from stagedmpc.tree import build_event_tree, variable_hyperstage

SETTINGS = settings(max_examples=40, deadline=None)


def binary_setup(ds):
    t = build_event_tree(ds)
    prior = leaf_path_prior(t)
    b, rmap = binary_resize(t)
    bp = transport_prior(prior, rmap)
    return b, bp, variable_hyperstage(b)


@SETTINGS
@given(datasets(max_vars=4, max_levels=4, max_count=200))
def test_ahc_never_below_saturated(ds):
    t = build_event_tree(ds)
    prior = leaf_path_prior(t)
    res = ahc(t, variable_hyperstage(t), prior)
    assert res.log_score >= res.saturated_score - 1e-9
    assert res.log_score == pytest.approx(model_score(t, res.staging, prior), abs=1e-9)


@SETTINGS
@given(datasets(max_vars=4, max_levels=4, max_count=200))
def test_mpc_considers_no_more_than_ahc_on_binary_tree(ds):
    b, bp, h = binary_setup(ds)
    assert mpc(b, h, bp).total_evaluated <= ahc(b, h, bp).total_evaluated


@SETTINGS
@given(datasets(max_vars=3, binary=True, max_count=30))
def test_exact_dominates_and_replays(ds):
    t = build_event_tree(ds)
    prior = leaf_path_prior(t)
    h = variable_hyperstage(t)
    ea = exact_map(t, h, prior)
    for res in (ahc(t, h, prior), mpc(t, h, prior), exact_map(t, h, prior, "interval")):
        assert ea.log_score >= res.log_score - 1e-9
        assert replay(t, prior, h, res) == pytest.approx(res.log_score, abs=1e-9)


@SETTINGS
@given(datasets(max_vars=3, max_levels=3, max_count=100))
def test_json_round_trip_and_ceg_idempotence(ds):
    b, bp, h = binary_setup(ds)
    res = mpc(b, h, bp)
    text = export_json(res, b, bp, h)
    t2, p2, r2 = import_json(text)
    assert t2 == b and r2.staging == res.staging
    assert export_json(r2, t2, p2, h) == text
    ceg = to_ceg(b, res.staging)
    assert recompact(ceg) == ceg
