import math

import numpy as np
import pytest
from scipy.integrate import quad

from twoweight.measures import Cube, MeasureError, MeasureSpec, dyadic_family, generate
from twoweight import testing as tc
from twoweight.testing import (bct_fractional, cancellation_constant, cancellation_ratio, cube_testing,
                               dense_operator_matrix, operator_norm)


@pytest.fixture(scope="module")
def leb():
    return generate(MeasureSpec("lebesgue"), 1, 10)


def test_testing_integral_lebesgue(leb):
    # int_0^1 (2 sqrt x + 2 sqrt(1-x))^2 dx = 4 + pi
    assert tc.testing_integral(leb, leb, leb.box, 0.5) == pytest.approx(4 + math.pi, rel=2e-3)


def test_testing_integral_point_mass(leb):
    atom = generate(MeasureSpec("point-masses", {"points": [[0.5]]}), 1, 10)
    # int_0^1 |x - 1/2|^(-1/2) dx = 2 sqrt 2
    assert tc.testing_integral(atom, leb, leb.box, 0.75) == pytest.approx(2 * math.sqrt(2), rel=1e-2)


def test_cube_testing_and_directions(leb):
    fam = dyadic_family(leb.box, range(3))
    fwd = cube_testing(leb, leb, 0.5, fam)
    back = cube_testing(leb, leb, 0.5, fam, "backward")
    assert fwd.value == pytest.approx(back.value)
    assert fwd.meta["squared"]
    with pytest.raises(MeasureError):
        cube_testing(leb, leb, 0.5, fam, "sideways")


def test_cancellation_ratio_quadrature(leb):
    def inner(x):
        f = lambda y: abs(x - y) ** -0.5
        total = 0.0
        for a, b in ((max(0.0, x - 0.5), x - 0.125), (x + 0.125, min(1.0, x + 0.5))):
            if b > a:
                total += quad(f, a, b)[0]
        return total

    lhs = quad(lambda x: inner(x) ** 2, 0, 1, limit=200)[0]
    assert cancellation_ratio(leb, leb, 0.5, [0.5], 0.125, 0.5) == pytest.approx(lhs, rel=2e-2)


def test_cancellation_constant_reports_triple(leb):
    rep = cancellation_constant(leb, leb, 0.5)
    x0, eps, N = rep.extremizer
    assert 0 < eps < N
    assert rep.to_dict()["name"] == "A-cancel-forward"


@pytest.mark.parametrize("L", [5, 7])
def test_norm_matches_dense_svd(L):
    mu = generate(MeasureSpec("lebesgue"), 1, L)
    rep = operator_norm(mu, mu, 0.5)
    assert rep.meta["converged"]
    assert rep.value == pytest.approx(np.linalg.norm(dense_operator_matrix(mu, mu, 0.5), 2), rel=1e-6)


def test_bct_below_norm():
    for mu, alpha in ((generate(MeasureSpec("lebesgue"), 1, 8), 0.5),
                      (generate(MeasureSpec("cantor-product"), 1, 9), 0.5),
                      (generate(MeasureSpec("lebesgue"), 2, 4), 1.0)):
        bct = bct_fractional(mu, mu, alpha, dyadic_family(mu.box, range(mu.level - 1))).value
        assert bct <= operator_norm(mu, mu, alpha).value * (1 + 1e-9)


def test_bct_lebesgue_value(leb):
    rep = bct_fractional(leb, leb, 0.5, dyadic_family(leb.box, range(4)))
    assert rep.value == pytest.approx(8 / 3, rel=1e-3)
    assert isinstance(rep.extremizer, Cube)
