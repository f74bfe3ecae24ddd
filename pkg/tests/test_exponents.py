import math

import numpy as np
import pytest

from twoweight.exponents import (diagonal_reverse_doubling_exponent, doubling_check, doubling_exponent,
                                 reverse_doubling_exponent, reverse_from_doubling_bound)
from twoweight.measures import Cube, CubeFamily, MeasureError, MeasureSpec, generate


@pytest.mark.parametrize("n,L", [(1, 8), (2, 6)])
def test_lebesgue_exponents(n, L):
    mu = generate(MeasureSpec("lebesgue"), n, L)
    assert doubling_exponent(mu).exponent == pytest.approx(n, abs=1e-6)
    assert reverse_doubling_exponent(mu).exponent == pytest.approx(n, abs=1e-6)
    diag = diagonal_reverse_doubling_exponent(mu, mu)
    assert diag.exponent == pytest.approx(2 * n, abs=1e-6)
    assert diag.theta == pytest.approx(n, abs=1e-6)


def test_line_measure_exponents():
    box = Cube((-1.0, -1.0), 2.0)
    line = generate(MeasureSpec("line-measure"), 2, 10, box)
    leb = generate(MeasureSpec("lebesgue"), 2, 10, box)
    axis = CubeFamily.from_cubes([Cube.from_center((x, 0.0), s) for s in (0.5, 1.0) for x in np.linspace(-0.5, 0.5, 5)])
    assert reverse_doubling_exponent(line, cubes=axis).exponent == pytest.approx(1.0, abs=0.05)
    assert diagonal_reverse_doubling_exponent(line, line, cubes=axis).exponent == pytest.approx(2.0, abs=0.05)
    assert diagonal_reverse_doubling_exponent(leb, line, cubes=axis).exponent == pytest.approx(3.0, abs=0.05)


@pytest.mark.filterwarnings("ignore:skipping")
def test_scan_records_extremal_and_family():
    mu = generate(MeasureSpec("cantor-product"), 1, 10)
    est = doubling_exponent(mu)
    assert est.extremal is not None
    assert len(est.scan) == 4
    d = est.to_dict()
    assert d["family"]["count"] > 0


def test_zero_mass_cubes_warn():
    mu = generate(MeasureSpec("cantor-product"), 1, 10)
    with pytest.warns(RuntimeWarning):
        reverse_doubling_exponent(mu)


def test_scale_validation():
    mu = generate(MeasureSpec("lebesgue"), 1, 4)
    with pytest.raises(MeasureError):
        doubling_exponent(mu, scales=(0.5,))
    with pytest.raises(MeasureError):
        reverse_doubling_exponent(mu, scales=(2.0,))


def test_doubling_check():
    mu = generate(MeasureSpec("lebesgue"), 1, 8)
    assert doubling_check(mu, 0.5) == pytest.approx(0.5)
    # a Cantor cube centred in a gap loses all its mass when shrunk
    cantor = generate(MeasureSpec("cantor-product"), 1, 12)
    assert doubling_check(cantor, 0.25, CubeFamily.from_cubes([Cube((0.0,), 1.0)])) == 0.0


def test_reverse_from_doubling_bound():
    assert reverse_from_doubling_bound(1, 1.0) == pytest.approx(1 - 2 / 5)
    assert reverse_from_doubling_bound(2, 2.0) == pytest.approx(1 - 8 / 25)
