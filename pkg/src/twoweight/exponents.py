"""Doubling, reverse doubling and diagonal reverse doubling exponents."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .measures import Cube, CubeFamily, GridMeasure, MeasureError, cube_masses, dyadic_family

DEFAULT_GROW = (2.0, 4.0, 8.0, 16.0)
DEFAULT_SHRINK = (0.5, 0.25, 0.125, 0.0625)


@dataclass
class ExponentEstimate:
    exponent: float
    scan: list[tuple[float, float]]
    extremal: Cube | None
    direction: str
    family: dict = field(default_factory=dict)

    @property
    def theta(self) -> float:
        """Half of a diagonal exponent (the ``theta`` of the shell bound)."""
        return self.exponent / 2 if self.direction == "diagonal-reverse" else self.exponent

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "exponent": self.exponent,
            "theta": self.theta,
            "scan": [[t, r] for t, r in self.scan],
            "extremal": self.extremal.to_dict() if self.extremal else None,
            "family": self.family,
        }


def default_family(mu: GridMeasure, finest: int | None = None) -> CubeFamily:
    """Dyadic plus half-shifted subcubes of the support box."""
    if finest is None:
        finest = max(0, mu.level - 2)
    return dyadic_family(mu.box, range(finest + 1))


def _masses(mus, cubes: CubeFamily) -> np.ndarray:
    out = np.ones(len(cubes))
    for mu in mus:
        out = out * cube_masses(mu, cubes)
    return out


def _scan(mus, scales, cubes: CubeFamily, direction: str, pick) -> ExponentEstimate:
    base = _masses(mus, cubes)
    keep = base > 0
    if not np.all(keep):
        warnings.warn(f"skipping {int((~keep).sum())} zero-mass cubes", RuntimeWarning, stacklevel=3)
    if not np.any(keep):
        raise MeasureError("no cube in the family has positive mass")
    fam = cubes.subset(keep)
    base = base[keep]
    scan, slopes, arg = [], [], []
    for t in scales:
        ratios = _masses(mus, fam.dilate(t)) / base
        i = int(np.argmax(ratios))
        worst = float(ratios[i])
        scan.append((float(t), worst))
        slopes.append(math.log(worst) / math.log(t) if worst > 0 else math.inf)
        arg.append(i)
    j = pick(slopes)
    return ExponentEstimate(float(slopes[j]), scan, fam[arg[j]], direction, fam.describe())


def doubling_exponent(mu: GridMeasure, scales=DEFAULT_GROW, cubes: CubeFamily | None = None) -> ExponentEstimate:
    """Max over ``t`` of ``log(sup_Q |tQ|/|Q|) / log t``."""
    if any(t < 2 for t in scales):
        raise MeasureError("doubling scales must be >= 2")
    cubes = default_family(mu) if cubes is None else cubes
    return _scan([mu], scales, cubes, "doubling", lambda s: int(np.argmax(s)))


def reverse_doubling_exponent(mu: GridMeasure, scales=DEFAULT_SHRINK, cubes: CubeFamily | None = None) -> ExponentEstimate:
    """Min over ``s`` of ``log(sup_Q |sQ|/|Q|) / log s``."""
    if any(not 0 < s < 1 for s in scales):
        raise MeasureError("reverse scales must lie in (0, 1)")
    cubes = default_family(mu) if cubes is None else cubes
    return _scan([mu], scales, cubes, "reverse", lambda s: int(np.argmin(s)))


def diagonal_reverse_doubling_exponent(sigma: GridMeasure, omega: GridMeasure, scales=DEFAULT_SHRINK,
                                       cubes: CubeFamily | None = None) -> ExponentEstimate:
    """Reverse doubling exponent of ``sigma x omega`` tested on cubes ``Q x Q``."""
    if sigma.dimension != omega.dimension:
        raise MeasureError("measures live in different dimensions")
    if any(not 0 < s < 1 for s in scales):
        raise MeasureError("reverse scales must lie in (0, 1)")
    cubes = default_family(sigma) if cubes is None else cubes
    return _scan([sigma, omega], scales, cubes, "diagonal-reverse", lambda s: int(np.argmin(s)))


def doubling_check(mu: GridMeasure, beta: float, cubes: CubeFamily | None = None) -> float:
    """``gamma = inf_Q |beta Q| / |Q|``; ``(beta, gamma)`` are doubling parameters iff gamma > 0."""
    if not 0 < beta < 1:
        raise MeasureError("beta must lie in (0, 1)")
    cubes = default_family(mu) if cubes is None else cubes
    base = cube_masses(mu, cubes)
    keep = base > 0
    if not np.all(keep):
        warnings.warn(f"skipping {int((~keep).sum())} zero-mass cubes", RuntimeWarning, stacklevel=2)
    if not np.any(keep):
        raise MeasureError("no cube in the family has positive mass")
    fam = cubes.subset(keep)
    return float(np.min(cube_masses(mu, fam.dilate(beta)) / base[keep]))


def reverse_from_doubling_bound(n: int, theta_doub: float) -> float:
    """Upper bound for ``|Q|/|3Q|`` implied by doubling with exponent ``theta_doub``.

    ``3Q \\ Q`` holds ``3**n - 1`` translates ``Q'`` of ``Q``; each has ``5Q'``
    containing ``3Q`` and so carries at least ``5**-theta |3Q|``.
    """
    return 1.0 - (3 ** n - 1) * 5.0 ** (-theta_doub)
