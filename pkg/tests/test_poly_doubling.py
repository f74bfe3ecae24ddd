import numpy as np
import pytest

from twoweight.exponents import doubling_check
from twoweight.measures import Cube, MeasureError, MeasureSpec, dyadic_family, generate
from twoweight.poly_doubling import (doubling_from_energy, energy_constant, energy_constant_family, exponents,
                                     gap_energy_oracle, gap_measure, polynomial, q_normalize, random_cubes,
                                     sup_norm, triadic_family)

UNIT = Cube((0.0,), 1.0)


def test_exponents():
    assert exponents(1, 3).tolist() == [[0], [1], [2]]
    assert len(exponents(2, 3)) == 6


def test_normalize_constant_and_identity():
    P = q_normalize([2.0], UNIT)
    assert P.global_coefficients() == pytest.approx([1.0])
    Q = q_normalize([0.0, 1.0], UNIT)
    assert Q.global_coefficients() == pytest.approx([0.0, 1.0], abs=1e-12)


def test_normalize_affine_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a, b = rng.normal(size=2)
        P = q_normalize([a, b], UNIT)
        scale = max(abs(a), abs(a + b))
        assert P.global_coefficients() == pytest.approx([a / scale, b / scale], rel=1e-9, abs=1e-12)


def test_normalized_sup_is_one_2d():
    Q = Cube((1.0, -2.0), 0.5)
    P = q_normalize(polynomial([0.3, -1.0, 2.0, 0.5, 0.1, -0.7], Q), None)
    s, _, _ = sup_norm(P, 1000)
    assert s == pytest.approx(1.0, abs=1e-9)
    corners = np.array([[1.0, -2.0], [1.5, -2.0], [1.0, -1.5], [1.5, -1.5]])
    assert np.all(np.abs(P(corners)) <= 1 + 1e-9)


def test_zero_polynomial_rejected():
    with pytest.raises(MeasureError):
        q_normalize([0.0, 0.0], UNIT)


def test_kappa_one_is_exactly_one():
    for mu in (generate(MeasureSpec("lebesgue"), 1, 8), generate(MeasureSpec("cantor-product"), 1, 10),
               generate(MeasureSpec("line-measure"), 2, 5)):
        assert energy_constant(mu, mu.box, 1).constant == 1.0


def test_lebesgue_kappa_two():
    mu = generate(MeasureSpec("lebesgue"), 1, 8)
    rep = energy_constant(mu, UNIT, 2)
    # brute force over endpoint values p = 1, q = t: (1 + t + t^2)/3
    t = np.linspace(-1, 1, 40001)
    assert rep.constant == pytest.approx(1 / np.min((1 + t + t * t) / 3), rel=1e-2)
    assert rep.converged
    assert abs(rep.minimizer.global_coefficients()[1]) == pytest.approx(1.5, rel=1e-3)


def test_lebesgue_energy_scale_invariant():
    mu = generate(MeasureSpec("lebesgue"), 1, 10)
    vals = [energy_constant(mu, Q, 2).constant for Q in random_cubes(mu, 8, seed=1, max_level=5)]
    assert np.allclose(vals, 4.0, rtol=1e-3)


def test_gap_measure_oracle_and_divergence():
    c1 = energy_constant(gap_measure(0.1), UNIT, 2).constant
    assert c1 == pytest.approx(gap_energy_oracle(0.1), rel=2e-2)
    c2 = energy_constant(gap_measure(0.001), UNIT, 2).constant
    assert c2 >= 10 * c1
    assert energy_constant(gap_measure(0.001), UNIT, 1).constant == 1.0


def test_doubling_from_energy_examples():
    d = doubling_from_energy(1.0, 1, 0.5)
    assert d.shrink == pytest.approx(0.25) and d.gamma == pytest.approx(0.5)
    d = doubling_from_energy(4.0, 2, 0.5)
    assert d.shrink == pytest.approx(1 / 16) and d.gamma == pytest.approx(1 / 8192)
    assert d.eps == pytest.approx(1 / (2 * (1 + 8 + 64 + 512)))
    with pytest.raises(MeasureError):
        doubling_from_energy(0.5, 1, 0.5)


def test_converse_on_lebesgue_and_cantor():
    leb = generate(MeasureSpec("lebesgue"), 1, 10)
    fam = dyadic_family(UNIT, range(5))
    d = doubling_from_energy(energy_constant_family(leb, fam, 2).constant, 1, 0.5)
    assert doubling_check(leb, d.shrink, fam) >= d.gamma
    cantor = generate(MeasureSpec("cantor-product"), 1, 14)
    tri = triadic_family(3)
    d = doubling_from_energy(energy_constant_family(cantor, tri, 2).constant, 1, 0.3)
    assert doubling_check(cantor, d.shrink, tri) >= d.gamma


def test_bellman_weight_is_nondegenerate():
    from twoweight.bellman import BellmanField, bellman_iterate, extract_weight_pair

    fld = bellman_iterate(BellmanField.empty(0.2, 64), 40)
    u, _ = extract_weight_pair(fld, fld.best_node(interior=True), 12).leaves()
    mu = generate(MeasureSpec("density-table", {"values": u}), 1, 12)
    vals = [energy_constant(mu, Q, 2).constant for Q in random_cubes(mu, 50, seed=3, max_level=9)]
    assert max(vals) < 5.0
