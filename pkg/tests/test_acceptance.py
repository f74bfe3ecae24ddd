"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import math

import pytest

from conftest import ACCEPTANCE_LINES
from twoweight import acceptance


def _run(fn):
    r = fn()
    print(r.line())
    ACCEPTANCE_LINES.append(r.line())
    return r


def test_criterion_1_line_measure():
    r = _run(acceptance.line_measure)
    m = r.metrics
    assert abs(m["sqrt_a2"] - 1) <= 0.1
    assert all(b > a for a, b in zip(m["energies"], m["energies"][1:]))
    assert m["r2"] >= 0.98
    assert r.passed


def test_criterion_2_shell_bound():
    r = _run(acceptance.shell_bound)
    for case in ("lebesgue x lebesgue", "lebesgue x line-measure"):
        assert r.metrics[case]["violations"] == 0
        assert r.metrics[case]["shell_failures"] == 0
    assert r.passed


def test_criterion_3_cantor():
    r = _run(acceptance.cantor)
    m = r.metrics
    theta = math.log(2) / math.log(3)
    assert m["ad_window_ratio"] <= 16
    assert all(c <= 4 * 2 ** (N * theta) for N, c in m["gamma_counts"].items())
    assert all(g >= 0.9 for g in m["growth_ratios"])
    assert m["disjoint"]
    assert r.passed


def test_criterion_4_bellman():
    r = _run(acceptance.bellman_certificate)
    assert r.metrics["max_ratio"] > 10
    lo, hi = r.metrics["certificate"]["sibling_ratio_range"]
    assert 0.8 < lo and hi < 1.2
    assert r.passed


def test_criterion_5_dyadic_identities():
    r = _run(acceptance.dyadic_identities)
    assert r.metrics["pairing_error"] <= 1e-12
    assert r.metrics["midpoint_error"] <= 1e-12
    assert r.metrics["rescale_invariance"]
    assert r.passed


def test_criterion_6_maximal_comparability():
    r = _run(acceptance.maximal_comparability)
    for ratios in (r.metrics["lebesgue"], r.metrics["cantor-product"]):
        assert all(1 / 32 <= x <= 32 for x in ratios)
    assert r.passed


def test_criterion_7_appendix():
    r = _run(acceptance.appendix)
    m = r.metrics
    assert m["kappa1"] == [1.0, 1.0, 1.0]
    assert m["lebesgue_kappa2"] == pytest.approx(m["oracle"], rel=0.01)
    assert m["gap"]["0.001"] >= 10 * m["gap"]["0.1"]
    for d in m["doubling"].values():
        assert d["measured"] >= d["gamma"]
    assert r.passed


def test_criterion_8_exponents():
    r = _run(acceptance.exponent_checks)
    for n in (1, 2):
        d = r.metrics[f"lebesgue_n{n}"]
        assert d["doubling"] == pytest.approx(n, abs=1e-6)
        assert d["reverse"] == pytest.approx(n, abs=1e-6)
    assert r.metrics["line_x_line"] == pytest.approx(2, abs=0.05)
    assert r.metrics["lebesgue_x_line"] == pytest.approx(3, abs=0.05)
    assert r.passed


def test_criterion_9_known_relations():
    r = _run(acceptance.known_relations)
    assert r.metrics["one_tailed"] == pytest.approx(2, rel=0.05)
    assert r.metrics["double_integral"] == pytest.approx(8 / 3, rel=0.02)
    for g in r.metrics["bct_vs_norm"].values():
        assert g["bct"] <= g["norm"] * (1 + 1e-9)
    assert r.passed
