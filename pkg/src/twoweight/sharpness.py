"""Sharpness scenarios: line measure in the plane and Ahlfors-David regular Cantor measures.

Both show a pair with finite fractional A2 constant whose maximal energy
``int_Q M^beta(1_Q mu)^2 dx`` is unbounded relative to ``|Q|_mu``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .measures import Cube, CubeFamily, GridMeasure, MeasureError, MeasureSpec, box_masses, cube_mass, \
    cube_masses, dyadic_family, generate
from .muckenhoupt import a2_classical
from .operators import maximal_energy_profile, maximal_function_on_cells


@dataclass
class ADWindow:
    low: float
    high: float
    theta: float
    bound: float
    per_scale: list  # (level, min, max)

    @property
    def ratio(self) -> float:
        return self.high / self.low if self.low > 0 else math.inf

    @property
    def passed(self) -> bool:
        return self.ratio <= self.bound

    def to_dict(self) -> dict:
        return {"theta": self.theta, "window": [self.low, self.high], "ratio": self.ratio,
                "bound": self.bound, "passed": self.passed,
                "per_scale": [list(r) for r in self.per_scale]}


@dataclass
class GammaCount:
    count: int
    N: int
    occupied: CubeFamily
    empty: CubeFamily

    def to_dict(self) -> dict:
        return {"N": self.N, "count": self.count, "empty": len(self.empty)}


@dataclass
class SharpnessReport:
    scenario: str
    a2: float
    energies: list
    cumulative: list = field(default_factory=list)
    step2_bounds: list = field(default_factory=list)
    regions: list = field(default_factory=list)  # cell-index arrays of Omega_1..Omega_m
    c_N: float | None = None
    N: int | None = None
    mass: float = 1.0
    disjoint: bool = True
    fit: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        doc = {
            "scenario": self.scenario,
            "a2": self.a2,
            "sqrt_a2": math.sqrt(self.a2),
            "energies": list(map(float, self.energies)),
            "checks": self.checks,
            "status": "PASS" if self.passed else "FAIL",
        }
        if self.scenario == "cantor-ad":
            doc.update({
                "N": self.N,
                "c_N": self.c_N,
                "mass": self.mass,
                "cumulative": list(map(float, self.cumulative)),
                "step2_bounds": list(map(float, self.step2_bounds)),
                "cumulative_step2": list(map(float, np.cumsum(self.step2_bounds))),
                "region_cells": [int(len(r)) for r in self.regions],
                "disjoint": self.disjoint,
            })
        else:
            doc["fit"] = self.fit
        return doc


# -- Ahlfors-David regularity --------------------------------------------------

def _positive(mu: GridMeasure, fam: CubeFamily) -> tuple[CubeFamily, np.ndarray]:
    m = cube_masses(mu, fam)
    keep = m > 1e-12 * max(mu.total_mass, 1e-300)
    return fam.subset(keep), m[keep]


def ad_regularity_check(mu: GridMeasure, theta: float, cubes: CubeFamily | None = None,
                        levels: int = 6, bound: float = 16.0) -> ADWindow:
    """Min and max of ``|3Q|_mu / l(Q)^theta`` over positive-mass cubes.

    The default family is the dyadic cubes of the support box at ``levels``
    consecutive scales.
    """
    if cubes is None:
        cubes = dyadic_family(mu.box, range(levels), shifted=False)
    fam, _ = _positive(mu, cubes)
    if not len(fam):
        raise MeasureError("no cube of positive mass")
    r = cube_masses(mu, fam.dilate(3.0)) / fam.sides ** theta
    per = []
    for s in np.unique(fam.sides)[::-1]:
        sel = fam.sides == s
        per.append((int(round(math.log2(mu.box.side / s))), float(r[sel].min()), float(r[sel].max())))
    return ADWindow(float(r.min()), float(r.max()), theta, bound, per)


def _subcubes(Q: Cube, N: int) -> CubeFamily:
    n = Q.dimension
    m = 1 << N
    s = Q.side / m
    idx = np.stack([g.ravel() for g in np.meshgrid(*([np.arange(m)] * n), indexing="ij")], axis=1)
    return CubeFamily(np.asarray(Q.corner) + idx * s, np.full(len(idx), s), "dyadic")


def gamma_count(mu: GridMeasure, Q: Cube, N: int) -> GammaCount:
    """Count the dyadic subcubes of ``Q`` of side ``2^-N l(Q)`` carrying mass.

    Also returns the empty ones (the witnesses used by the construction).
    """
    if N < 1:
        raise MeasureError("N must be at least 1")
    if Q.side / (1 << N) < mu.cell_size * (1 - 1e-9):
        raise MeasureError(f"N={N} is finer than the grid")
    fam = _subcubes(Q, N)
    m = box_masses(mu, fam.corners, fam.corners + fam.sides[:, None])
    occ = m > 1e-12 * max(mu.total_mass, 1e-300)
    return GammaCount(int(occ.sum()), N, fam.subset(occ), fam.subset(~occ))


# -- the accumulation construction --------------------------------------------

def _cell_slices(mu: GridMeasure, fam: CubeFamily) -> np.ndarray:
    """Lower and upper cell indices (per axis) of grid-aligned cubes."""
    lo = np.rint((fam.corners - np.asarray(mu.box.corner)) / mu.cell_size).astype(np.int64)
    w = np.rint(fam.sides / mu.cell_size).astype(np.int64)
    return lo, lo + w[:, None]


def _cells_of(mu: GridMeasure, fam: CubeFamily) -> np.ndarray:
    """Flat cell indices covered by a family of grid-aligned cubes."""
    n = mu.dimension
    lo, hi = _cell_slices(mu, fam)
    out = []
    for a, b in zip(lo, hi):
        g = np.meshgrid(*[np.arange(x, y) for x, y in zip(a, b)], indexing="ij")
        out.append(np.ravel_multi_index(tuple(x.ravel() for x in g), (mu.cells_per_side,) * n))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def _rounds(mu: GridMeasure, Q: Cube, N: int, rounds: int):
    """Generations ``Gamma`` and the chosen empty cubes, or the first cube lacking one."""
    gens, stars = [CubeFamily.from_cubes([Q])], []
    for _ in range(rounds):
        occ, emp = [], []
        for P in gens[-1]:
            g = gamma_count(mu, P, N)
            if not len(g.empty):
                return gens, stars, P
            occ.append(g.occupied)
            emp.append(g.empty[0])
        stars.append(CubeFamily.from_cubes(emp))
        gens.append(CubeFamily(np.concatenate([f.corners for f in occ]),
                               np.concatenate([f.sides for f in occ]), "dyadic"))
    return gens, stars, None


def accumulate_lower_bound(mu: GridMeasure, Q: Cube, beta: float, rounds: int = 5,
                           N: int | None = None, ad_bound: float = 16.0) -> SharpnessReport:
    """Run the empty-subcube construction for ``rounds`` rounds.

    Round ``k`` picks one empty dyadic subcube ``Q*`` of side ``2^-N l(P)``
    inside every cube ``P`` of the previous generation; ``Omega_k`` is their
    union and the next generation is the occupied subcubes.  On ``Q*`` the
    pointwise bound ``M^beta(1_Q mu) >= l(P)^(beta-n) |P|_mu`` holds, giving
    the per-round lower bounds ``step2_bounds``.  ``c_N`` is the round-one
    bound divided by ``|Q|_mu``.  ``energies`` are the integrals of
    ``M^beta(1_Q mu)^2`` over each ``Omega_k`` and ``cumulative`` their
    running sums; the growth check is ``cumulative[m-1] >= 0.9 m c_N |Q|_mu``.

    By default ``N`` starts at the smallest value for which ``Q`` itself has
    an empty subcube; it is raised (with a warning) until every visited cube
    has one.
    """
    n = mu.dimension
    if not 0 < beta < n / 2:
        raise MeasureError(f"beta must lie in (0, {n / 2})")
    mass = cube_mass(mu, Q)
    if mass <= 0:
        raise MeasureError("Q carries no mass")
    ad = ad_regularity_check(mu, n - 2 * beta, bound=ad_bound)
    if not ad.passed:
        warnings.warn(f"measure is not AD regular of order {n - 2 * beta} on the scan "
                      f"(window ratio {ad.ratio:.3g})", RuntimeWarning, stacklevel=2)
    depth = int(round(math.log2(Q.side / mu.cell_size)))
    if N is None:
        N = 1
        while N < depth and not len(gamma_count(mu, Q, N).empty):
            N += 1
    while True:
        if N * rounds > depth:
            raise MeasureError(f"no empty subcube found down to the grid (N={N}, {rounds} rounds)")
        gens, stars, bad = _rounds(mu, Q, N, rounds)
        if bad is None:
            break
        warnings.warn(f"cube at {bad.corner} side {bad.side} has no empty subcube at N={N}; "
                      f"raising N to {N + 1}", RuntimeWarning, stacklevel=2)
        N += 1

    step2 = []
    for k in range(rounds):
        P = gens[k]
        pm = cube_masses(mu, P)
        step2.append(float(np.sum((P.sides ** (beta - n) * pm) ** 2 * (P.sides / (1 << N)) ** n)))
    c_N = step2[0] / mass

    cutoff = min(depth, N * rounds)
    _, frac, M = maximal_function_on_cells(mu, Q, beta, cutoff)
    # cells meeting Q in the grid order of maximal_function_on_cells
    q_lo, q_hi = _cell_slices(mu, CubeFamily.from_cubes([Q]))
    shape = tuple(int(s) for s in q_hi[0] - q_lo[0])
    M = M.reshape(shape)
    vol = mu.cell_size ** n
    regions, energies = [], []
    for fam in stars:
        lo, hi = _cell_slices(mu, fam)
        e = 0.0
        for a, b in zip(lo - q_lo[0], hi - q_lo[0]):
            e += float(np.sum(M[tuple(slice(x, y) for x, y in zip(a, b))] ** 2)) * vol
        energies.append(e)
        regions.append(_cells_of(mu, fam))
    allc = np.concatenate(regions)
    disjoint = len(np.unique(allc)) == len(allc)
    cum = np.cumsum(energies)
    growth = [bool(cum[m - 1] >= 0.9 * m * c_N * mass) for m in range(1, rounds + 1)]
    a2 = a2_classical(mu, mu, 2 * beta, dyadic_family(mu.box, range(min(depth - 1, 10) + 1))).constant
    checks = {
        "ad_regular": ad.passed,
        "disjoint": bool(disjoint),
        "monotone": bool(np.all(np.diff(cum) > 0)),
        "growth": all(growth),
    }
    return SharpnessReport("cantor-ad", a2, energies, list(cum), step2, regions, c_N, N, mass,
                           bool(disjoint), {}, checks)


def cantor_scenario(L: int = 20, rounds: int = 5, ratio=None) -> SharpnessReport:
    """Middle-thirds (or ``ratio``) Cantor measure on ``[0, 1]`` with ``beta = (1 - theta)/2``."""
    spec = MeasureSpec("cantor-product", {} if ratio is None else {"ratio": ratio})
    mu = generate(spec, 1, L)
    beta = (1 - spec.ad_order(1)) / 2
    return accumulate_lower_bound(mu, mu.box, beta, rounds)


# -- line measure --------------------------------------------------------------

def line_measure_divergence(R: float = 1.0, levels: int = 10, L: int = 10) -> SharpnessReport:
    """Normalized maximal energies of the line measure on ``[0, R]^2`` for cutoffs ``1..levels``.

    ``alpha = 1``, ``beta = 1/2``.  The A2 constant is taken over the cubes
    ``[0, 2^-j R]^2`` together with the dyadic cubes of the box.
    """
    if levels < 1:
        raise MeasureError("levels must be at least 1")
    if levels > L:
        raise MeasureError("levels cannot exceed the grid level")
    box = Cube((0.0, 0.0), R)
    mu = generate(MeasureSpec("line-measure"), 2, L, box)
    corner = [Cube((0.0, 0.0), R / (1 << j)) for j in range(L + 1)]
    fam = dyadic_family(box, range(max(0, L - 2) + 1))
    fam = CubeFamily(np.concatenate([fam.corners, [c.corner for c in corner]]),
                     np.concatenate([fam.sides, [c.side for c in corner]]), "dyadic+corner")
    a2 = a2_classical(mu, mu, 1.0, fam).constant
    mass = cube_mass(mu, box)
    prof = maximal_energy_profile(mu, box, 0.5, levels)[1:] / mass
    k = np.arange(1, levels + 1, dtype=float)
    fit = {"slope": math.nan, "intercept": math.nan, "r2": math.nan}
    if levels >= 2:
        slope, icpt = np.polyfit(k, prof, 1)
        resid = prof - (slope * k + icpt)
        ss = float(np.sum((prof - prof.mean()) ** 2))
        fit = {"slope": float(slope), "intercept": float(icpt),
               "r2": 1.0 - float(np.sum(resid ** 2)) / ss if ss > 0 else 1.0,
               "increments": np.diff(prof).tolist()}
    checks = {"a2_near_one": abs(math.sqrt(a2) - 1) <= 0.1}
    if levels >= 2:
        checks["increasing"] = bool(np.all(np.diff(prof) > 0))
        checks["linear_fit"] = bool(fit["r2"] >= 0.98)
    return SharpnessReport("line-measure", a2, list(prof), fit=fit, checks=checks)
