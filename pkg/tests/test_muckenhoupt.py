import math

import pytest

from twoweight.measures import Cube, CubeFamily, MeasureError, MeasureSpec, dyadic_family, generate
from twoweight.muckenhoupt import a2_classical, a2_one_tailed, poisson


def test_lebesgue_classical_is_one():
    mu = generate(MeasureSpec("lebesgue"), 1, 8)
    for alpha in (0.0, 0.5):
        assert a2_classical(mu, mu, alpha).constant == pytest.approx(1.0)


def test_line_measure_classical_is_one():
    mu = generate(MeasureSpec("line-measure"), 2, 8)
    cubes = CubeFamily.from_cubes([Cube((0.0, 0.0), 2.0 ** -j) for j in range(6)])
    rep = a2_classical(mu, mu, 1.0, cubes)
    assert rep.constant == pytest.approx(1.0)
    assert rep.to_dict()["sqrt_constant"] == pytest.approx(1.0)


def test_one_tailed_wide_box():
    mu = generate(MeasureSpec("lebesgue"), 1, 14, Cube((-64.0,), 128.0))
    rep = a2_one_tailed(mu, mu, 0.0, dyadic_family(Cube((0.0,), 1.0), range(5)))
    assert rep.constant == pytest.approx(2.0, rel=0.05)
    back = a2_one_tailed(mu, mu, 0.0, dyadic_family(Cube((0.0,), 1.0), range(5)), backward=True)
    assert back.constant == pytest.approx(rep.constant)


def test_poisson_point_mass():
    # the atom's cell meets Q and is split into two half-mass subcells
    mu = generate(MeasureSpec("point-masses", {"points": [[0.5]]}), 1, 6)
    Q = Cube((0.25,), 0.5)
    h = mu.cell_size
    expect = 0.5 ** 0.5 * sum(0.5 * (0.5 + d) ** -1.0 for d in (h / 4, 3 * h / 4))
    assert poisson(Q, mu, 0.5) == pytest.approx(expect, rel=1e-12)


def test_one_tailed_dominates_classical():
    # P(Q, mu) >= |Q|_mu l^(a-n) (1 + sqrt(n)/2)^(2(a-n)) cube by cube
    mu = generate(MeasureSpec("cantor-product"), 1, 10)
    fam = dyadic_family(mu.box, range(5))
    alpha = 0.3
    a = a2_classical(mu, mu, alpha, fam).values
    b = a2_one_tailed(mu, mu, alpha, fam).values
    assert (b >= a * 1.5 ** (-2 * (1 - alpha)) * (1 - 1e-9)).all()


def test_alpha_range():
    mu = generate(MeasureSpec("lebesgue"), 1, 4)
    with pytest.raises(MeasureError):
        a2_classical(mu, mu, 1.0)
