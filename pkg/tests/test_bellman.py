import json
import math

import numpy as np
import pytest

from twoweight.bellman import (BellmanField, WeightPair, bellman_iterate, concavity_defect, extract_weight_pair,
                               move_menu, rescale_invariance_check, rescale_pair, verify_certificate)
from twoweight.operators import pairing


@pytest.fixture(scope="module")
def field64():
    return bellman_iterate(BellmanField.empty(0.2, 64), 80)


def test_move_menu():
    menu = move_menu(0.2)
    assert len(menu) == 6
    assert all(s2 > 0 for _, s2 in menu)
    assert {s2 for _, s2 in menu} == {0.01, 0.005}


def test_first_sweep_value():
    fld = bellman_iterate(BellmanField.empty(0.2, 128), 1)
    p = np.exp(fld.u[:, None] + fld.v[None, :])
    interior = fld.inside & (p < 0.9)
    # from B = 0 the best move is the largest y2: B_1 = 2 (tau/20) x1 x2
    assert np.allclose(fld.values[interior], 0.02 * p[interior], rtol=1e-12)


def test_iteration_is_monotone(field64):
    ratios = [r for _, r in field64.history]
    assert all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
    assert field64.iterations == 80
    assert np.all(field64.values[~field64.inside] == 0)


def test_target_stops_early():
    fld = bellman_iterate(BellmanField.empty(0.2, 64), 1000, target=0.5)
    assert fld.history[-1][1] > 0.5
    assert fld.iterations < 1000


def test_concavity_defect():
    fld = BellmanField.empty(0.2, 64)
    x, y = np.array([0.5, 0.5]), np.array([0.0, 0.05])
    assert concavity_defect(fld, x, y) == pytest.approx(2 * 0.05 * 0.5)
    with pytest.raises(ValueError):
        concavity_defect(fld, np.array([2.0, 2.0]), y)


def test_shared_tree_matches_dense_expansion(field64):
    start = field64.best_node(interior=True)
    pair = extract_weight_pair(field64, start, 12)
    u, v = pair.leaves()
    dense = WeightPair.from_leaves(u, v, 0.2)
    assert pair.node_count < dense.node_count
    assert np.mean(u) == pytest.approx(start[0], rel=1e-12)
    assert np.mean(v) == pytest.approx(start[1], rel=1e-12)
    assert pair.functional() == pytest.approx(dense.functional(), rel=1e-12)
    a, b = verify_certificate(pair, 0.2, 5.0), verify_certificate(dense, 0.2, 5.0)
    assert a.max_product == pytest.approx(b.max_product, rel=1e-12)
    assert a.ratio_range == pytest.approx(b.ratio_range, rel=1e-12)
    assert a.checks["product"] and a.checks["doubling"]


def test_functional_stops_at_gamma(field64):
    start = field64.best_node(interior=True)
    pair = extract_weight_pair(field64, start, gamma=0.3, max_depth=400)
    cert = verify_certificate(pair, 0.2, 0.3)
    assert cert.normalized > 0.3
    assert cert.passed


def test_certificate_detects_violations():
    bad = WeightPair.from_leaves([2.0, 2.0], [1.0, 1.0])
    cert = verify_certificate(bad, 0.2, 0.0)
    assert not cert.checks["product"]
    steep = WeightPair.from_leaves([1.0, 0.1], [0.5, 0.5])
    assert not verify_certificate(steep, 0.2, 0.0).checks["doubling"]


def test_half_convention_matches_pairing():
    rng = np.random.default_rng(0)
    u, v = rng.uniform(0.5, 1.0, 64), rng.uniform(0.5, 1.0, 64)
    pair = WeightPair.from_leaves(u, v)
    cert = verify_certificate(pair, 0.9, 0.0)
    tu, tv = pair.trees()
    assert cert.half_functional == pytest.approx(pairing(tu, tv), abs=1e-14)
    assert cert.functional == pytest.approx(2 * cert.half_functional, abs=1e-14)


def test_rescaling():
    rng = np.random.default_rng(5)
    pair = WeightPair.from_leaves(rng.uniform(0.5, 2, 16), rng.uniform(0.5, 2, 16))
    big = rescale_pair(pair, -2, 3)
    u, v = big.leaves()
    assert len(u) == 64
    assert np.all(u[:48] == 1) and np.all(v[:48] == 1)
    assert rescale_invariance_check(pair, -2, 3)
    with pytest.raises(ValueError):
        rescale_pair(pair, 1, 0)


def test_extract_validates_start(field64):
    with pytest.raises(ValueError):
        extract_weight_pair(field64, (2.0, 2.0), 4)
    with pytest.raises(ValueError):
        extract_weight_pair(field64, (0.5, 0.5))


def test_pair_serialization(field64):
    pair = extract_weight_pair(field64, field64.best_node(interior=True), 20)
    doc = pair.to_dict()
    assert "scales" in doc and doc["depth"] == 20
    small = extract_weight_pair(field64, field64.best_node(interior=True), 6).to_dict()
    assert len(small["leaves_u"]) == 64


def test_compressed_pair_round_trip(field64):
    pair = extract_weight_pair(field64, field64.best_node(interior=True), 18)
    doc = pair.to_dict()
    assert "children" in doc
    back = WeightPair.from_dict(json.loads(json.dumps(doc)))
    assert back.functional() == pytest.approx(pair.functional(), rel=1e-12)
    assert back.depth == 18
