"""Testing constants for the fractional integral: BCT, cube testing, cancellation, norm."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .measures import Cube, CubeFamily, GridMeasure, MeasureError, cube_masses, restrict
from .operators import (
    _center_rule_error,
    kernel_array,
    kernel_coefficients,
    potential_on_cells,
    fractional_pairing,
)

CONSTANT_NAMES = ("BCT", "T-forward", "T-backward", "A-cancel-forward", "A-cancel-backward", "Norm")


@dataclass
class ConstantReport:
    name: str
    value: float
    extremizer: object = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        ext = self.extremizer
        if isinstance(ext, Cube):
            ext = ext.to_dict()
        elif isinstance(ext, tuple):
            ext = [list(map(float, np.atleast_1d(e))) if np.ndim(e) else float(e) for e in ext]
        return {"name": self.name, "value": self.value, "extremizer": ext, "meta": self.meta}


def _family(cubes) -> CubeFamily:
    return cubes if isinstance(cubes, CubeFamily) else CubeFamily.from_cubes(cubes)


def _check(sigma: GridMeasure, omega: GridMeasure, alpha: float):
    if not sigma.same_grid(omega):
        raise MeasureError("sigma and omega must share a grid")
    if not 0 < alpha < sigma.dimension:
        raise MeasureError(f"alpha must lie in (0, {sigma.dimension}), got {alpha}")


def bct_fractional(sigma: GridMeasure, omega: GridMeasure, alpha: float, cubes) -> ConstantReport:
    """``sup_Q int_Q I^alpha(1_Q sigma) d omega / sqrt(|Q|_sigma |Q|_omega)``."""
    _check(sigma, omega, alpha)
    fam = _family(cubes)
    ms, mw = cube_masses(sigma, fam), cube_masses(omega, fam)
    best, arg, skipped = 0.0, None, 0
    for k, Q in enumerate(fam):
        if ms[k] <= 0 or mw[k] <= 0:
            skipped += 1
            continue
        v = fractional_pairing(sigma, omega, Q, alpha) / math.sqrt(ms[k] * mw[k])
        if arg is None or v > best:
            best, arg = v, Q
    return ConstantReport("BCT", best, arg, {"cubes": len(fam), "skipped": skipped, "alpha": alpha})


def testing_integral(sigma: GridMeasure, omega: GridMeasure, Q: Cube, alpha: float) -> float:
    """``int_Q I^alpha(1_Q sigma)^2 d omega`` with the potential averaged per cell."""
    s, w = restrict(sigma, Q), restrict(omega, Q)
    pot = potential_on_cells(s, w, alpha)
    return float(np.dot(w.mass, pot ** 2))


def cube_testing(sigma: GridMeasure, omega: GridMeasure, alpha: float, cubes,
                 direction: str = "forward") -> ConstantReport:
    """``sup_Q |Q|_sigma^-1 int_Q I^alpha(1_Q sigma)^2 d omega`` (squared testing constant).

    ``direction="backward"`` swaps the roles of the measures.
    """
    if direction not in ("forward", "backward"):
        raise MeasureError("direction must be 'forward' or 'backward'")
    if direction == "backward":
        sigma, omega = omega, sigma
    _check(sigma, omega, alpha)
    fam = _family(cubes)
    ms = cube_masses(sigma, fam)
    best, arg, skipped = 0.0, None, 0
    for k, Q in enumerate(fam):
        if ms[k] <= 0:
            skipped += 1
            continue
        v = testing_integral(sigma, omega, Q, alpha) / ms[k]
        if arg is None or v > best:
            best, arg = v, Q
    name = "T-forward" if direction == "forward" else "T-backward"
    return ConstantReport(name, best, arg, {"cubes": len(fam), "skipped": skipped, "squared": True})


def _truncated_potential(sigma: GridMeasure, targets: np.ndarray, alpha: float,
                         x0: np.ndarray, eps: float, N: float) -> np.ndarray:
    """``int_{eps<|x-y|<N} |x-y|^(alpha-n) d sigma(y)`` at target points, cell-center rule."""
    n = sigma.dimension
    src_c = sigma.centers()
    near = np.sqrt(np.sum((src_c - x0) ** 2, axis=1)) < 2 * N + sigma.cell_size * math.sqrt(n)
    src_c, src_m = src_c[near], sigma.mass[near]
    out = np.zeros(len(targets))
    for start in range(0, len(targets), 256):
        t = targets[start:start + 256]
        d = np.sqrt(np.sum((t[:, None, :] - src_c[None, :, :]) ** 2, axis=2))
        ok = (d > eps) & (d < N)
        k = np.where(ok, np.where(ok, d, 1.0) ** (alpha - n), 0.0)
        out[start:start + 256] = k @ src_m
    return out


def cancellation_ratio(sigma: GridMeasure, omega: GridMeasure, alpha: float,
                       x0, eps: float, N: float) -> float:
    """Left side over right side of the cancellation inequality for one triple."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not 0 < eps <= N:
        raise MeasureError("need 0 < eps <= N")
    rhs = float(sigma.mass[np.sqrt(np.sum((sigma.centers() - x0) ** 2, axis=1)) < N].sum())
    if eps >= N:
        return 0.0
    wc = omega.centers()
    inb = np.sqrt(np.sum((wc - x0) ** 2, axis=1)) < N
    if not np.any(inb):
        return 0.0
    pot = _truncated_potential(sigma, wc[inb], alpha, x0, eps, N)
    lhs = float(np.dot(omega.mass[inb], pot ** 2))
    if rhs <= 0:
        return math.inf if lhs > 0 else 0.0
    return lhs / rhs


def default_triples(mu: GridMeasure, levels: Sequence[int] = (1, 2, 3), stride: int = 1):
    """Cell-center ``x0`` at coarse levels with dyadic ``eps < N``."""
    out = []
    side = mu.box.side
    for j in levels:
        m = 1 << j
        c = (np.arange(0, m, stride) + 0.5) * side / m
        grids = np.meshgrid(*([c] * mu.dimension), indexing="ij")
        pts = np.asarray(mu.box.corner) + np.stack([g.ravel() for g in grids], axis=1)
        N = side / m
        for x0 in pts:
            for e in (N / 2, N / 4, N / 8):
                out.append((x0, e, N))
    return out


def cancellation_constant(sigma: GridMeasure, omega: GridMeasure, alpha: float,
                          samples: Iterable | None = None, direction: str = "forward") -> ConstantReport:
    """``sup`` over sampled ``(x0, eps, N)`` of the cancellation ratio."""
    if direction == "backward":
        sigma, omega = omega, sigma
    _check(sigma, omega, alpha)
    samples = list(default_triples(sigma) if samples is None else samples)
    best, arg = 0.0, None
    for x0, eps, N in samples:
        v = cancellation_ratio(sigma, omega, alpha, x0, eps, N)
        if arg is None or v > best:
            best, arg = v, (np.atleast_1d(np.asarray(x0, dtype=float)), float(eps), float(N))
    name = "A-cancel-forward" if direction == "forward" else "A-cancel-backward"
    return ConstantReport(name, best, arg, {"samples": len(samples)})


# -- discretized norm ----------------------------------------------------------

def _window(sigma: GridMeasure, omega: GridMeasure):
    idx = np.concatenate([sigma.index, omega.index])
    lo, hi = idx.min(axis=0), idx.max(axis=0) + 1
    shape = tuple(int(s) for s in hi - lo)

    def dense(mu):
        d = np.zeros(shape)
        d[tuple((mu.index - lo).T)] = mu.mass
        return d

    return dense(sigma), dense(omega), hi - lo


def dense_operator_matrix(sigma: GridMeasure, omega: GridMeasure, alpha: float) -> np.ndarray:
    """``M[i, j] = K(i, j) sqrt(sigma_j) sqrt(omega_i)`` over populated cells."""
    _check(sigma, omega, alpha)
    n = sigma.dimension
    off = (omega.index[:, None, :] - sigma.index[None, :, :]).reshape(-1, n)
    K = kernel_coefficients(off, n, alpha).reshape(len(omega.mass), len(sigma.mass))
    K *= sigma.cell_size ** (alpha - n)
    return np.sqrt(omega.mass)[:, None] * K * np.sqrt(sigma.mass)[None, :]


def operator_norm(sigma: GridMeasure, omega: GridMeasure, alpha: float, tol: float = 1e-8,
                  max_iter: int = 2000) -> ConstantReport:
    """Largest singular value of the discretized ``I^alpha: L^2(sigma) -> L^2(omega)``.

    Power iteration on ``M^T M`` with FFT matrix-vector products.
    """
    _check(sigma, omega, alpha)
    n = sigma.dimension
    if not len(sigma.mass) or not len(omega.mass):
        return ConstantReport("Norm", 0.0, None, {"iterations": 0, "converged": True})
    s, w, shape = _window(sigma, omega)
    W = kernel_array(shape - 1, n, alpha) * sigma.cell_size ** (alpha - n)
    rs, rw = np.sqrt(s), np.sqrt(w)
    sl = tuple(slice(m - 1, 2 * m - 1) for m in shape)

    def apply(x, left, right):
        return left * fftconvolve(right * x, W, mode="full")[sl]

    x = (rs > 0).astype(float)
    x /= np.linalg.norm(x)
    est, converged, it = 0.0, False, 0
    for it in range(1, max_iter + 1):
        y = apply(apply(x, rw, rs), rs, rw)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            est, converged = 0.0, True
            break
        new = math.sqrt(nrm)
        x = y / nrm
        if abs(new - est) <= tol * new:
            est, converged = new, True
            break
        est = new
    err = est * _center_rule_error(n, alpha)
    return ConstantReport("Norm", est, None, {
        "iterations": it, "converged": converged, "lower_bound_only": not converged,
        "error_bar": err, "label": "discretized cell-matrix norm",
    })
