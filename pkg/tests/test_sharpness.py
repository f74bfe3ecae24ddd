import math
import warnings

import numpy as np
import pytest

from twoweight.measures import Cube, MeasureError, MeasureSpec, generate
from twoweight.sharpness import (accumulate_lower_bound, ad_regularity_check, cantor_scenario, gamma_count,
                                 line_measure_divergence)

THETA = math.log(2) / math.log(3)


@pytest.fixture(scope="module")
def cantor16():
    return generate(MeasureSpec("cantor-product"), 1, 16)


def test_ad_window_lebesgue():
    mu = generate(MeasureSpec("lebesgue"), 1, 10)
    w = ad_regularity_check(mu, 1.0)
    assert 1.0 <= w.low and w.high <= 3.0 + 1e-12
    assert w.high == pytest.approx(3.0)


def test_ad_window_cantor(cantor16):
    w = ad_regularity_check(cantor16, THETA, levels=6)
    assert w.passed and w.ratio <= 16
    assert len(w.per_scale) == 6


def test_ad_window_wrong_exponent_widens(cantor16):
    w = ad_regularity_check(cantor16, 1.0, levels=12)
    highs = [hi for _, _, hi in w.per_scale]
    assert highs[-1] > 4 * highs[2]
    assert not w.passed


def test_gamma_count_examples(cantor16):
    leb = generate(MeasureSpec("lebesgue"), 2, 6)
    assert gamma_count(leb, leb.box, 3).count == 64
    atom = generate(MeasureSpec("point-masses", {"points": [[0.3]]}), 1, 10)
    assert all(gamma_count(atom, atom.box, N).count == 1 for N in range(1, 8))
    g = gamma_count(cantor16, cantor16.box, 4)
    assert g.count == 10  # dyadic sixteenths meeting the middle-thirds set
    assert g.count + len(g.empty) == 16
    assert g.count <= 4 * 2 ** (4 * THETA)
    with pytest.raises(MeasureError):
        gamma_count(cantor16, cantor16.box, 17)


def test_gamma_count_enumeration(cantor16):
    # enumeration oracle: a dyadic interval meets the Cantor set iff its mass is positive
    for N in range(1, 7):
        m = 1 << N
        masses = np.add.reduceat(cantor16.dense(), np.arange(0, 1 << 16, (1 << 16) // m))
        assert gamma_count(cantor16, cantor16.box, N).count == int(np.sum(masses > 0))


def test_accumulation(cantor16):
    rep = accumulate_lower_bound(cantor16, cantor16.box, (1 - THETA) / 2, rounds=4)
    assert rep.N == 3
    assert rep.step2_bounds[0] == pytest.approx(rep.c_N * rep.mass)
    assert rep.energies[0] >= rep.step2_bounds[0] * (1 - 1e-12)
    assert all(e >= b * (1 - 1e-12) for e, b in zip(rep.energies, rep.step2_bounds))
    assert rep.disjoint and rep.checks["monotone"]
    for m, c in enumerate(rep.cumulative, start=1):
        assert c >= 0.9 * m * rep.c_N * rep.mass
    assert rep.to_dict()["status"] == "PASS"


def test_accumulation_lebesgue_errors():
    leb = generate(MeasureSpec("lebesgue"), 1, 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(MeasureError):
            accumulate_lower_bound(leb, leb.box, 0.25, rounds=2)


def test_cantor_scenario_reports_finite_a2():
    rep = cantor_scenario(L=16, rounds=3)
    assert rep.a2 < 10
    assert rep.passed


def test_line_measure_divergence():
    rep = line_measure_divergence(1.0, 6, 8)
    assert math.sqrt(rep.a2) == pytest.approx(1.0, rel=0.1)
    assert np.all(np.diff(rep.energies) > 0)
    assert rep.fit["r2"] >= 0.98
    single = line_measure_divergence(1.0, 1, 6)
    assert len(single.energies) == 1 and math.isnan(single.fit["r2"])
