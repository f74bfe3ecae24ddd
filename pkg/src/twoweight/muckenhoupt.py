"""Classical and one-tailed fractional Muckenhoupt constants."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .measures import Cube, CubeFamily, GridMeasure, MeasureError, cube_masses
from .exponents import default_family

VARIANTS = ("classical", "one-tailed-forward", "one-tailed-backward")


@dataclass
class MuckenhouptReport:
    alpha: float
    constant: float
    extremal: Cube | None
    variant: str
    values: np.ndarray | None = None
    family: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "alpha": self.alpha,
            "constant": self.constant,
            "sqrt_constant": float(np.sqrt(self.constant)),
            "extremal": self.extremal.to_dict() if self.extremal else None,
            "family": self.family,
        }


def _check(alpha: float, n: int):
    if not 0 <= alpha < n:
        raise MeasureError(f"alpha must lie in [0, {n}), got {alpha}")


def _family(mu: GridMeasure, cubes) -> CubeFamily:
    if cubes is None:
        return default_family(mu)
    if not isinstance(cubes, CubeFamily):
        return CubeFamily.from_cubes(cubes)
    return cubes


def _report(vals: np.ndarray, fam: CubeFamily, alpha: float, variant: str) -> MuckenhouptReport:
    i = int(np.argmax(vals))
    return MuckenhouptReport(alpha, float(vals[i]), fam[i], variant, vals, fam.describe())


def a2_classical(sigma: GridMeasure, omega: GridMeasure, alpha: float, cubes=None) -> MuckenhouptReport:
    """``sup_Q |Q|_sigma |Q|_omega / |Q|^(2(1 - alpha/n))``."""
    n = sigma.dimension
    _check(alpha, n)
    fam = _family(sigma, cubes)
    vol = fam.sides ** n
    vals = cube_masses(sigma, fam) * cube_masses(omega, fam) / vol ** (2 * (1 - alpha / n))
    return _report(vals, fam, alpha, "classical")


def poisson(Q: Cube, mu: GridMeasure, alpha: float) -> float:
    """``P^alpha(Q, mu) = int l(Q)^(n-alpha) / (l(Q) + |x - x_Q|)^(2(n-alpha)) dmu(x)``."""
    return float(poisson_many(CubeFamily.from_cubes([Q]), mu, alpha)[0])


def poisson_many(fam: CubeFamily, mu: GridMeasure, alpha: float) -> np.ndarray:
    """Poisson integrals for every cube of ``fam``.

    Cells meeting the interior of the cube are split once into ``2**n``
    subcells before the kernel is evaluated at cell centers.
    """
    n = mu.dimension
    _check(alpha, n)
    out = np.zeros(len(fam))
    if not len(mu.mass):
        return out
    g = n - alpha
    h = mu.cell_size
    lo = np.asarray(mu.box.corner) + mu.index * h
    centers = lo + h / 2
    subs = (np.array(list(product((0.25, 0.75), repeat=n))) - 0.5) * h
    for k in range(len(fam)):
        ell = fam.sides[k]
        c, xq = fam.corners[k], fam.centers[k]
        hit = np.all((lo < c + ell) & (lo + h > c), axis=1)
        d = np.sqrt(np.sum((centers[~hit] - xq) ** 2, axis=1))
        total = float(np.dot(mu.mass[~hit], (ell + d) ** (-2 * g)))
        if np.any(hit):
            pts = centers[hit][:, None, :] + subs[None, :, :]
            d = np.sqrt(np.sum((pts - xq) ** 2, axis=2))
            total += float(np.dot(mu.mass[hit] / 2 ** n, np.sum((ell + d) ** (-2 * g), axis=1)))
        out[k] = ell ** g * total
    return out


def a2_one_tailed(sigma: GridMeasure, omega: GridMeasure, alpha: float, cubes=None,
                  backward: bool = False) -> MuckenhouptReport:
    """``sup_Q P^alpha(Q, sigma) |Q|_omega / |Q|^(1 - alpha/n)``; ``backward`` swaps the measures."""
    if backward:
        sigma, omega = omega, sigma
    n = sigma.dimension
    _check(alpha, n)
    fam = _family(sigma, cubes)
    wm = cube_masses(omega, fam)
    vals = np.zeros(len(fam))
    pos = wm > 0
    if np.any(pos):
        vals[pos] = poisson_many(fam.subset(pos), sigma, alpha) * wm[pos] / (fam.sides[pos] ** n) ** (1 - alpha / n)
    return _report(vals, fam, alpha, "one-tailed-backward" if backward else "one-tailed-forward")
