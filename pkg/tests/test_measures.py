import json
import math
from fractions import Fraction

import numpy as np
import pytest

from twoweight.measures import (Cube, CubeFamily, GridMeasure, MeasureError, MeasureSpec, aggregate, box_masses,
                                cantor_cdf, cube_mass, cube_masses, dilate, dyadic_family, from_json_dict, generate,
                                load, product_diagonal_mass, restrict, save, spec_from_dict, to_csv, to_json_dict)


def test_lebesgue_cells():
    mu = generate(MeasureSpec("lebesgue"), 1, 3)
    assert len(mu.mass) == 8
    assert np.allclose(mu.mass, 1 / 8)


def test_line_measure_bottom_row():
    mu = generate(MeasureSpec("line-measure"), 2, 2)
    d = mu.dense()
    assert np.allclose(d[:, 0], 1 / 4)
    assert np.all(d[:, 1:] == 0)


def test_cantor_total_and_gaps():
    mu = generate(MeasureSpec("cantor-product"), 1, 12)
    assert math.isclose(mu.total_mass, 1.0, rel_tol=1e-12)
    # the middle third carries nothing
    assert cube_mass(mu, Cube((0.34,), 0.32)) == pytest.approx(0.0, abs=1e-12)
    assert cube_mass(mu, Cube((0.0,), 0.5)) == pytest.approx(0.5, abs=1e-12)
    # cells are uniform inside, so a non-aligned cut is only approximate
    assert cube_mass(mu, Cube((0.0,), 1 / 3)) == pytest.approx(0.5, abs=2e-3)


def _cantor_function(x: Fraction, digits: int = 60) -> float:
    """Ternary-digit evaluation of the middle-thirds Cantor function."""
    val, w = Fraction(0), Fraction(1, 2)
    for _ in range(digits):
        x *= 3
        d = int(x)
        x -= d
        if d == 1:
            return float(val + w)
        val += w * (d // 2)
        w /= 2
    return float(val)


def test_cantor_cdf_matches_ternary_oracle():
    L = 8
    F = cantor_cdf(L)
    assert F[0] == 0 and F[-1] == 1
    for k in (1, 37, 85, 128, 200, 255):
        assert F[k] == pytest.approx(_cantor_function(Fraction(k, 1 << L)), abs=1e-12)


def test_cantor_ratio_validation():
    with pytest.raises(MeasureError):
        MeasureSpec("cantor-product", {"ratio": 0.6})
    assert MeasureSpec("cantor-product", {"ratio": "1/4"}).ad_order() == pytest.approx(0.5)


def test_cube_mass_examples():
    mu = generate(MeasureSpec("lebesgue"), 1, 6)
    assert cube_mass(mu, Cube((0.0,), 0.5)) == pytest.approx(0.5)
    assert cube_mass(mu, Cube((3.0,), 1.0)) == 0.0
    line = generate(MeasureSpec("line-measure"), 2, 6)
    for R in (0.25, 0.5, 1.0):
        assert cube_mass(line, Cube((0.0, 0.0), R)) == pytest.approx(R)


def test_cube_mass_fractional_overlap():
    mu = generate(MeasureSpec("lebesgue"), 1, 3)
    assert cube_mass(mu, Cube((0.1,), 0.3)) == pytest.approx(0.3)
    assert cube_mass(mu, mu.box) == pytest.approx(mu.total_mass)


def test_dilate_examples():
    assert dilate(Cube((0.0,), 1.0), 3) == Cube((-1.0,), 3.0)
    assert dilate(Cube((0.0, 0.0), 1.0), 1) == Cube((0.0, 0.0), 1.0)
    assert dilate(Cube((2.0,), 2.0), 0.5) == Cube((2.5,), 1.0)
    with pytest.raises(MeasureError):
        dilate(Cube((0.0,), 1.0), 0)


def test_product_diagonal_mass():
    mu = generate(MeasureSpec("lebesgue"), 1, 4)
    assert product_diagonal_mass(mu, mu, mu.box) == pytest.approx(1.0)
    with pytest.raises(MeasureError):
        product_diagonal_mass(mu, generate(MeasureSpec("lebesgue"), 2, 2), mu.box)


def test_point_masses():
    mu = generate(MeasureSpec("point-masses", {"points": [[0.3], [0.31]], "weights": [1.0, 2.0]}), 1, 4)
    assert mu.total_mass == pytest.approx(3.0)
    assert len(mu.mass) == 1
    with pytest.raises(MeasureError):
        generate(MeasureSpec("point-masses", {"points": [[0.3]], "weights": [-1.0]}), 1, 4)


def test_density_table():
    vals = np.array([[1.0, 0.0], [0.0, 3.0]])
    mu = generate(MeasureSpec("density-table", {"values": vals}), 2, 3)
    assert mu.total_mass == pytest.approx(1.0)
    assert cube_mass(mu, Cube((0.5, 0.5), 0.5)) == pytest.approx(0.75)


def test_box_masses_matches_cube_mass():
    rng = np.random.default_rng(1)
    mu = generate(MeasureSpec("cantor-product"), 2, 6)
    lo = rng.random((20, 2)) * 0.8
    hi = lo + rng.random((20, 2)) * 0.2
    got = box_masses(mu, lo, hi)
    # compare against brute force over cells with overlap fractions
    h = mu.cell_size
    cl = mu.index * h
    ref = []
    for a, b in zip(lo, hi):
        f = np.prod(np.clip(np.minimum(cl + h, b) - np.maximum(cl, a), 0, None), axis=1) / h ** 2
        ref.append(float(np.dot(f, mu.mass)))
    assert np.allclose(got, ref, atol=1e-13)


def test_dyadic_family_and_masses():
    mu = generate(MeasureSpec("lebesgue"), 2, 4)
    fam = dyadic_family(mu.box, range(3), shifted=False)
    assert len(fam) == 1 + 4 + 16
    assert np.allclose(cube_masses(mu, fam), fam.sides ** 2)


def test_aggregate_and_restrict():
    mu = generate(MeasureSpec("cantor-product"), 1, 8)
    coarse = aggregate(mu, 4)
    assert coarse.level == 4
    assert coarse.total_mass == pytest.approx(mu.total_mass)
    r = restrict(mu, Cube((0.0,), 0.5))
    assert r.total_mass == pytest.approx(0.5)


def test_json_roundtrip(tmp_path):
    mu = generate(MeasureSpec("cantor-product"), 1, 6)
    again = from_json_dict(json.loads(json.dumps(to_json_dict(mu))))
    assert again == mu
    save(mu, tmp_path / "m.json")
    assert load(tmp_path / "m.json") == mu
    assert to_csv(mu).splitlines()[0] == "i0,mass"


def test_spec_from_dict():
    spec = spec_from_dict({"kind": "cantor-product", "ratio": "1/3"})
    assert float(spec.ratio) == pytest.approx(1 / 3)


def test_rejects_bad_input():
    with pytest.raises(MeasureError):
        MeasureSpec("unknown")
    with pytest.raises(MeasureError):
        generate(MeasureSpec("lebesgue"), 1, -1)
    with pytest.raises(MeasureError):
        generate(MeasureSpec("line-measure"), 1, 3)
    with pytest.raises(MeasureError):
        Cube((0.0,), -1.0)
