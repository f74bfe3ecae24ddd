"""The nine acceptance checks, shared by ``twoweight verify-all`` and the test suite."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bellman, exponents, muckenhoupt, operators, poly_doubling, sharpness, testing
from .measures import Cube, CubeFamily, MeasureSpec, cube_mass, dyadic_family, generate


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.1f}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "status": "PASS" if self.passed else "FAIL",
                "seconds": self.seconds, "limit_seconds": self.limit, "metrics": self.metrics}


def _timed(number: int, name: str, limit: float | None):
    def wrap(fn):
        def run(**kw) -> CriterionResult:
            t = time.perf_counter()
            ok, metrics = fn(**kw)
            dt = time.perf_counter() - t
            if limit is not None:
                metrics["within_time"] = dt <= limit
                ok = ok and dt <= limit
            return CriterionResult(number, name, bool(ok), metrics, dt, limit)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


@_timed(1, "line-measure sharpness", 30.0)
def line_measure(levels: int = 10, L: int = 10):
    rep = sharpness.line_measure_divergence(1.0, levels, L)
    root = math.sqrt(rep.a2)
    ok = abs(root - 1) <= 0.1 and rep.checks.get("increasing", False) and rep.fit.get("r2", 0) >= 0.98
    return ok, {"sqrt_a2": root, "energies": rep.energies, "r2": rep.fit.get("r2"), "slope": rep.fit.get("slope")}


def _random_dyadic(box: Cube, levels: int, count: int, rng, keep) -> list[Cube]:
    out = []
    n = box.dimension
    while len(out) < count:
        j = int(rng.integers(0, levels + 1))
        s = box.side / (1 << j)
        i = rng.integers(0, 1 << j, size=n)
        Q = Cube(tuple(np.asarray(box.corner) + i * s), s)
        if keep(Q):
            out.append(Q)
    return out


@_timed(2, "shell bound", 60.0)
def shell_bound(cubes: int = 100, seed: int = 0):
    rng = np.random.default_rng(seed)
    cases = {
        "lebesgue x lebesgue": ("lebesgue", "lebesgue", 1, 0.5, 1.0, 10),
        "lebesgue x line-measure": ("lebesgue", "line-measure", 2, 1.6, 1.5, 7),
    }
    metrics, ok = {}, True
    for name, (s_kind, w_kind, n, alpha, theta, L) in cases.items():
        sigma = generate(MeasureSpec(s_kind), n, L)
        omega = generate(MeasureSpec(w_kind), n, L)
        qs = _random_dyadic(sigma.box, L - 2, cubes, rng, lambda Q: cube_mass(omega, Q) > 0)
        fam = CubeFamily.from_cubes(list(dyadic_family(sigma.box, range(L - 1))) + qs + [Q.dilate(9.0) for Q in qs])
        A = muckenhoupt.a2_classical(sigma, omega, alpha, fam).constant
        C = operators.theorem_constant(theta, alpha, n)
        violations, shell_fail, worst, tight = 0, 0, 0.0, math.inf
        for Q in qs:
            p = operators.fractional_pairing(sigma, omega, Q, alpha)
            rhs = C * math.sqrt(A) * math.sqrt(cube_mass(sigma, Q) * cube_mass(omega, Q))
            sb = operators.shell_upper_bound(sigma, omega, Q, alpha, theta)
            violations += p > rhs
            shell_fail += sb < p
            worst = max(worst, p / rhs)
            tight = min(tight, sb / p)
        metrics[name] = {"a2": A, "constant": C, "violations": int(violations), "shell_failures": int(shell_fail),
                         "max_pairing_over_bound": worst, "min_shell_over_pairing": tight}
        ok = ok and violations == 0 and shell_fail == 0
    return ok, metrics


@_timed(3, "Cantor sharpness", 30.0)
def cantor(L: int = 20, rounds: int = 5):
    theta = math.log(2) / math.log(3)
    mu = generate(MeasureSpec("cantor-product"), 1, L)
    ad = sharpness.ad_regularity_check(mu, theta, levels=6)
    counts = {N: sharpness.gamma_count(mu, mu.box, N).count for N in range(1, 7)}
    count_ok = all(c <= 4 * 2 ** (N * theta) for N, c in counts.items())
    rep = sharpness.accumulate_lower_bound(mu, mu.box, (1 - theta) / 2, rounds)
    ratios = [c / (m * rep.c_N * rep.mass) for m, c in enumerate(rep.cumulative, start=1)]
    growth = all(r >= 0.9 for r in ratios)
    return ad.passed and count_ok and growth and rep.disjoint, {
        "ad_window_ratio": ad.ratio, "gamma_counts": counts, "c_N": rep.c_N, "N": rep.N,
        "cumulative": rep.cumulative, "growth_ratios": ratios, "step2_bounds": rep.step2_bounds,
        "disjoint": rep.disjoint,
    }


@_timed(4, "Bellman counterexample", 120.0)
def bellman_certificate(tau: float = 0.2, gamma: float = 5.0, size: int = 256):
    fld = bellman.bellman_iterate(bellman.BellmanField.empty(tau, size), 10_000, target=10.0)
    peak = float(fld.ratio.max())
    _, pair, cert = bellman.certify(tau, gamma, fld=fld)
    lo, hi = cert.ratio_range
    ok = peak > 10 and cert.passed and 0.8 < lo and hi < 1.2
    return ok, {"sweeps": fld.iterations, "max_ratio": peak, "certificate": cert.to_dict()}


@_timed(5, "exact dyadic identities", None)
def dyadic_identities(count: int = 20, depth: int = 8, seed: int = 0):
    rng = np.random.default_rng(seed)
    err_pair = err_mid = 0.0
    rescale_ok = True
    for _ in range(count):
        u = rng.uniform(0.1, 2.0, 1 << depth)
        v = rng.uniform(0.1, 2.0, 1 << depth)
        tu, tv = operators.HaarTree(u), operators.HaarTree(v)
        riemann = float(np.mean(operators.hilbert_on_leaves(tv) * u))
        half = 0.5 * sum(float(np.dot(tv.differences[k], tu.averages[k])) / (1 << k) for k in range(depth))
        err_pair = max(err_pair, abs(operators.pairing(tu, tv) - riemann), abs(half - riemann))
        for k in range(depth):
            mid = (tu.averages[k + 1][0::2] + tu.averages[k + 1][1::2]) / 2
            err_mid = max(err_mid, float(np.max(np.abs(mid - tu.averages[k]))))
        k = -int(rng.integers(1, 4))
        ell = int(rng.integers(0, 1 << -k))
        pair = bellman.WeightPair.from_leaves(u, v)
        rescale_ok = rescale_ok and bellman.rescale_invariance_check(pair, k, ell, tol=1e-12)
    ok = err_pair <= 1e-12 and err_mid <= 1e-12 and rescale_ok
    return ok, {"pairing_error": err_pair, "midpoint_error": err_mid, "rescale_invariance": rescale_ok}


@_timed(6, "Muckenhoupt-Wheeden comparability", None)
def maximal_comparability(L: int = 12, c: float = 32.0):
    theta = math.log(2) / math.log(3)
    metrics, ok = {}, True
    for kind, alpha in (("lebesgue", 0.5), ("cantor-product", 1 - theta)):
        mu = generate(MeasureSpec(kind), 1, L)
        ratios = []
        for j in range(3):
            Q = Cube((0.0,), 2.0 ** -j)
            p = operators.fractional_pairing(mu, mu, Q, alpha)
            e = operators.fractional_maximal_energy(mu, Q, alpha / 2, L - j)
            ratios.append(p / e)
        metrics[kind] = ratios
        ok = ok and all(1 / c <= r <= c for r in ratios)
    return ok, metrics


@_timed(7, "appendix constants", 30.0)
def appendix(seed: int = 0):
    metrics = {}
    leb = generate(MeasureSpec("lebesgue"), 1, 10)
    cantor_mu = generate(MeasureSpec("cantor-product"), 1, 14)
    line = generate(MeasureSpec("line-measure"), 2, 6)
    unit = leb.box
    k1 = [poly_doubling.energy_constant(m, m.box, 1).constant for m in (leb, cantor_mu, line)]
    metrics["kappa1"] = k1
    # brute force over endpoint values (p, q) with max(|p|, |q|) = 1
    t = np.linspace(-1, 1, 20001)
    oracle = 1 / float(np.min((1 + t + t * t) / 3))  # p = 1, q = t by symmetry
    c2 = poly_doubling.energy_constant(leb, unit, 2, seed=seed).constant
    metrics["lebesgue_kappa2"] = c2
    metrics["oracle"] = oracle
    g1 = poly_doubling.energy_constant(poly_doubling.gap_measure(0.1), unit, 2, seed=seed).constant
    g2 = poly_doubling.energy_constant(poly_doubling.gap_measure(0.001), unit, 2, seed=seed).constant
    metrics["gap"] = {"0.1": g1, "0.001": g2}
    # doubling parameters from the measured constants
    fam_l = dyadic_family(unit, range(6))
    Cl = poly_doubling.energy_constant_family(leb, fam_l, 2, seed=seed).constant
    dl = poly_doubling.doubling_from_energy(Cl, 1, 0.5)
    fam_c = poly_doubling.triadic_family(4)
    Cc = poly_doubling.energy_constant_family(cantor_mu, fam_c, 2, seed=seed).constant
    dc = poly_doubling.doubling_from_energy(Cc, 1, 0.3)
    gl = exponents.doubling_check(leb, dl.shrink, fam_l)
    gc = exponents.doubling_check(cantor_mu, dc.shrink, fam_c)
    metrics["doubling"] = {"lebesgue": {**dl.to_dict(), "measured": gl},
                           "cantor": {**dc.to_dict(), "measured": gc}}
    ok = (all(v == 1.0 for v in k1) and abs(c2 / oracle - 1) <= 0.01 and g2 >= 10 * g1
          and gl >= dl.gamma and gc >= dc.gamma)
    return ok, metrics


@_timed(8, "exponents", None)
def exponent_checks():
    metrics = {}
    ok = True
    for n, L in ((1, 8), (2, 6)):
        mu = generate(MeasureSpec("lebesgue"), n, L)
        d = exponents.doubling_exponent(mu).exponent
        r = exponents.reverse_doubling_exponent(mu).exponent
        metrics[f"lebesgue_n{n}"] = {"doubling": d, "reverse": r}
        ok = ok and abs(d - n) <= 1e-6 and abs(r - n) <= 1e-6
    box = Cube((-1.0, -1.0), 2.0)
    line = generate(MeasureSpec("line-measure"), 2, 10, box)
    leb = generate(MeasureSpec("lebesgue"), 2, 10, box)
    axis = CubeFamily.from_cubes([Cube.from_center((x, 0.0), s) for s in (0.5, 1.0)
                                  for x in np.linspace(-0.5, 0.5, 5)])
    dll = exponents.diagonal_reverse_doubling_exponent(line, line, cubes=axis).exponent
    dlb = exponents.diagonal_reverse_doubling_exponent(leb, line, cubes=axis).exponent
    metrics["line_x_line"] = dll
    metrics["lebesgue_x_line"] = dlb
    ok = ok and abs(dll - 2) <= 0.05 and abs(dlb - 3) <= 0.05
    return ok, metrics


@_timed(9, "known relations", None)
def known_relations():
    metrics = {}
    wide = generate(MeasureSpec("lebesgue"), 1, 14, Cube((-64.0,), 128.0))
    one = muckenhoupt.a2_one_tailed(wide, wide, 0.0, dyadic_family(Cube((0.0,), 1.0), range(5))).constant
    metrics["one_tailed"] = one
    leb = generate(MeasureSpec("lebesgue"), 1, 10)
    integral = operators.fractional_pairing(leb, leb, leb.box, 0.5)
    metrics["double_integral"] = integral
    grids = {}
    ok_norm = True
    for name, mu, alpha in (("lebesgue L=8", generate(MeasureSpec("lebesgue"), 1, 8), 0.5),
                            ("lebesgue L=10", generate(MeasureSpec("lebesgue"), 1, 10), 0.5),
                            ("cantor L=10", generate(MeasureSpec("cantor-product"), 1, 10), 0.5),
                            ("lebesgue 2d L=5", generate(MeasureSpec("lebesgue"), 2, 5), 1.0)):
        bct = testing.bct_fractional(mu, mu, alpha, dyadic_family(mu.box, range(min(mu.level - 1, 6)))).value
        nrm = testing.operator_norm(mu, mu, alpha).value
        grids[name] = {"bct": bct, "norm": nrm}
        ok_norm = ok_norm and bct <= nrm * (1 + 1e-9)
    metrics["bct_vs_norm"] = grids
    ok = abs(one / 2 - 1) <= 0.05 and abs(integral / (8 / 3) - 1) <= 0.02 and ok_norm
    return ok, metrics


CRITERIA = (line_measure, shell_bound, cantor, bellman_certificate, dyadic_identities,
            maximal_comparability, appendix, exponent_checks, known_relations)


def run_all(selected=None) -> list[CriterionResult]:
    out = []
    for k, fn in enumerate(CRITERIA, start=1):
        if selected and k not in selected:
            continue
        out.append(fn())
    return out
