"""Fractional integrals, the dyadic-shell majorant, M^beta and the dyadic Hilbert transform.

Kernel sums use cell-averaged kernel coefficients: for two level-``L`` cells
with integer offset ``k`` the coefficient is ``h**(alpha-n) * W(k)``, where
``W(k)`` is the mean of ``|x - y|**(alpha-n)`` over ``x`` uniform in the unit
cell and ``y`` uniform in its ``k``-translate.  This is the exact kernel
pairing for measures that are uniform inside each cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.signal import fftconvolve

from .measures import Cube, GridMeasure, MeasureError, box_masses, cube_mass, restrict

# offsets up to this sup-norm radius use quadrature instead of the center rule
QUAD_RADIUS = {1: 8, 2: 4}
_GL_ORDER = 12
# dense FFT sums are used above this many populated cells
_DIRECT_LIMIT = 2500


# -- cell-averaged kernel ----------------------------------------------------

@lru_cache(maxsize=None)
def _triangle_rule(order: int = _GL_ORDER):
    """Nodes/weights for the density 1 - |d| on [-1, 1] (the law of X - Y)."""
    x, w = np.polynomial.legendre.leggauss(order)
    t = (x + 1) / 2  # [0, 1]
    nodes = np.concatenate([t - 1, t])
    weights = np.concatenate([w / 2 * t, w / 2 * (1 - t)])
    return nodes, weights


def _quad_coefficient(k: tuple[int, ...], gamma: float) -> float:
    d, w = _triangle_rule()
    n = len(k)
    grids = np.meshgrid(*([d] * n), indexing="ij")
    wts = np.ones_like(grids[0])
    for ax, wg in enumerate(np.meshgrid(*([w] * n), indexing="ij")):
        wts = wts * wg
    r2 = sum((g + ki) ** 2 for g, ki in zip(grids, k))
    return float(np.sum(wts * r2 ** (-gamma / 2)))


@lru_cache(maxsize=None)
def near_field(n: int, alpha: float) -> dict[tuple[int, ...], float]:
    """Cell-averaged kernel ``W(k)`` for ``|k|_inf <= QUAD_RADIUS[n]``.

    Offsets with ``|k|_inf >= 2`` are integrated by tensor Gauss-Legendre
    (the kernel is smooth there).  For touching cells the average obeys the
    subdivision identity ``W(k) = 2**(gamma-2n) sum_{a,b} W(2k + b - a)``;
    it is solved exactly as a linear system over the ``3**n`` near offsets,
    i.e. the recursive subdivision carried to infinite depth.
    """
    gamma = n - alpha
    if not 0 < alpha < n:
        raise MeasureError(f"alpha must lie in (0, n), got {alpha}")
    radius = QUAD_RADIUS.get(n, 3)
    table: dict[tuple[int, ...], float] = {}
    for k in product(range(-radius, radius + 1), repeat=n):
        if max(abs(c) for c in k) >= 2:
            table[k] = _quad_coefficient(k, gamma)
    near = list(product((-1, 0, 1), repeat=n))
    pos = {k: i for i, k in enumerate(near)}
    A = np.eye(len(near))
    rhs = np.zeros(len(near))
    scale = 2.0 ** (gamma - 2 * n)
    for k in near:
        i = pos[k]
        for a in product((0, 1), repeat=n):
            for b in product((0, 1), repeat=n):
                kk = tuple(2 * ki + bi - ai for ki, ai, bi in zip(k, a, b))
                if kk in pos:
                    A[i, pos[kk]] -= scale
                else:
                    rhs[i] += scale * table[kk]
    sol = np.linalg.solve(A, rhs)
    for k, v in zip(near, sol):
        table[k] = float(v)
    return table


@lru_cache(maxsize=None)
def _center_rule_error(n: int, alpha: float) -> float:
    """Relative error of the center rule just outside the quadrature table."""
    gamma = n - alpha
    k = (QUAD_RADIUS.get(n, 3) + 1,) + (0,) * (n - 1)
    exact = _quad_coefficient(k, gamma)
    return abs(exact - float(k[0]) ** (-gamma)) / exact


def kernel_coefficients(offsets: np.ndarray, n: int, alpha: float) -> np.ndarray:
    """``W(k)`` for an ``(m, n)`` array of integer offsets."""
    offsets = np.asarray(offsets, dtype=np.int64).reshape(-1, n)
    gamma = n - alpha
    table = near_field(n, alpha)
    radius = QUAD_RADIUS.get(n, 3)
    r2 = np.sum(offsets.astype(float) ** 2, axis=1)
    out = np.empty(len(offsets))
    far = np.max(np.abs(offsets), axis=1) > radius
    out[far] = r2[far] ** (-gamma / 2)
    for i in np.flatnonzero(~far):
        out[i] = table[tuple(int(c) for c in offsets[i])]
    return out


def kernel_array(half_width: np.ndarray | int, n: int, alpha: float) -> np.ndarray:
    """Dense table of ``W`` over offsets ``[-w_i, w_i]`` in each axis."""
    hw = np.broadcast_to(np.asarray(half_width, dtype=np.int64), (n,))
    axes = [np.arange(-w, w + 1) for w in hw]
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum(g.astype(float) ** 2 for g in grids)
    with np.errstate(divide="ignore"):
        out = r2 ** (-(n - alpha) / 2)
    for k, v in near_field(n, alpha).items():
        if all(abs(c) <= w for c, w in zip(k, hw)):
            out[tuple(c + w for c, w in zip(k, hw))] = v
    return out


# -- fractional pairing --------------------------------------------------------

@dataclass(frozen=True)
class PairingResult:
    value: float
    error_bar: float


def _check_alpha(alpha: float, n: int):
    if not 0 < alpha < n:
        raise MeasureError(f"alpha must lie in (0, {n}), got {alpha}")


def _dense_window(mu: GridMeasure, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = np.zeros(tuple(int(s) for s in hi - lo))
    inside = np.all((mu.index >= lo) & (mu.index < hi), axis=1)
    d[tuple((mu.index[inside] - lo).T)] = mu.mass[inside]
    return d


def _support_window(*mus: GridMeasure):
    idx = np.concatenate([m.index for m in mus if len(m.index)])
    return idx.min(axis=0), idx.max(axis=0) + 1


def potential_on_cells(source: GridMeasure, target: GridMeasure, alpha: float):
    """``I^alpha(source)`` averaged over each populated cell of ``target``."""
    n = source.dimension
    h = source.cell_size
    if not len(source.mass) or not len(target.mass):
        return np.zeros(len(target.mass))
    if len(source.mass) * len(target.mass) <= _DIRECT_LIMIT ** 2:
        out = np.zeros(len(target.mass))
        for start in range(0, len(target.mass), 512):
            t = target.index[start:start + 512]
            off = (t[:, None, :] - source.index[None, :, :]).reshape(-1, n)
            W = kernel_coefficients(off, n, alpha).reshape(len(t), -1)
            out[start:start + 512] = W @ source.mass
        return out * h ** (alpha - n)
    lo, hi = _support_window(source, target)
    s = _dense_window(source, lo, hi)
    W = kernel_array(hi - lo - 1, n, alpha)
    full = fftconvolve(s, W, mode="full")
    sl = tuple(slice(w - 1, w - 1 + s_) for w, s_ in zip(hi - lo, hi - lo))
    pot = full[sl]
    return pot[tuple((target.index - lo).T)] * h ** (alpha - n)


def fractional_pairing(sigma: GridMeasure, omega: GridMeasure, Q: Cube, alpha: float,
                       return_error: bool = False):
    """``int_Q I^alpha(1_Q sigma) d omega = iint_{QxQ} |x-y|^(alpha-n) dsigma domega``.

    With ``return_error`` a :class:`PairingResult` is returned whose error bar
    bounds the center-rule error of the far-field cell pairs.
    """
    if not sigma.same_grid(omega):
        raise MeasureError("sigma and omega must share a grid")
    _check_alpha(alpha, sigma.dimension)
    s = restrict(sigma, Q)
    w = restrict(omega, Q)
    pot = potential_on_cells(s, w, alpha)
    value = float(np.dot(pot, w.mass))
    if return_error:
        return PairingResult(value, value * _center_rule_error(sigma.dimension, alpha))
    return value


# -- dyadic shells -----------------------------------------------------------

def covering_constant(n: int, alpha: float) -> float:
    """``C`` with ``|x-y|^(alpha-n) <= C sum_k sum_I l(I)^(alpha-n) 1_{3I x 3I}``.

    Taking the largest ``k`` with ``2^-k l(Q) >= |x-y|_inf`` and the dyadic
    ``I`` of that side containing ``x`` puts ``(x, y)`` in ``3I x 3I`` with
    ``l(I) < 2|x-y|``, so ``2**(n - alpha)`` suffices.
    """
    return 2.0 ** (n - alpha)


def theorem_constant(theta: float, alpha: float, n: int) -> float:
    """Explicit ``C_{theta,alpha,n}`` in ``pairing <= C sqrt(A2) sqrt(|Q|_s |Q|_w)``.

    covering constant * 3^n (overlap of the ``3I``) * sum_k 2^{-k(theta+alpha-n)}
    * 9^{n-alpha} (passing from ``l(Q)`` to ``l(9Q)``).
    """
    excess = theta + alpha - n
    if excess <= 0:
        raise MeasureError("need theta + alpha > n for a convergent shell sum")
    return covering_constant(n, alpha) * 3 ** n * 9.0 ** (n - alpha) / (1 - 2.0 ** (-excess))


def _tripled_pieces(Q: Cube, k: int):
    """Lower/upper corners of ``3I cap Q`` for the dyadic ``I`` of side ``2^-k l(Q)``."""
    n = Q.dimension
    s = Q.side / (1 << k)
    idx = np.stack([g.ravel() for g in np.meshgrid(*([np.arange(1 << k)] * n), indexing="ij")], axis=1)
    lo_q = np.asarray(Q.corner)
    lo = np.maximum(lo_q + (idx - 1) * s, lo_q)
    hi = np.minimum(lo_q + (idx + 2) * s, lo_q + Q.side)
    return lo, hi


def grid_depth(mu: GridMeasure, Q: Cube) -> int:
    """Number of halvings from ``l(Q)`` down to the cell size."""
    return max(0, int(math.ceil(math.log2(Q.side / mu.cell_size) - 1e-9)))


def shell_terms(sigma: GridMeasure, omega: GridMeasure, Q: Cube, alpha: float,
                k_max: int | None = None) -> np.ndarray:
    """Per-scale sums ``sum_I l(I)^(alpha-n) |3I cap Q|_sigma |3I cap Q|_omega``."""
    n = sigma.dimension
    if k_max is None:
        k_max = grid_depth(sigma, Q) + 2
    out = np.zeros(k_max + 1)
    for k in range(k_max + 1):
        lo, hi = _tripled_pieces(Q, k)
        a = box_masses(sigma, lo, hi)
        b = box_masses(omega, lo, hi)
        out[k] = (Q.side / (1 << k)) ** (alpha - n) * float(np.dot(a, b))
    return out


@dataclass(frozen=True)
class ShellBound:
    value: float
    per_scale: np.ndarray  # contribution of each resolved scale k
    tail: float            # closed-form bound for the unresolved scales
    hypothesis_ok: np.ndarray  # whether 2^{-k theta} sqrt(|9Q||9Q|) dominated the data


def shell_upper_bound(sigma: GridMeasure, omega: GridMeasure, Q: Cube, alpha: float,
                      theta: float, detail: bool = False):
    """Dyadic-shell majorant of :func:`fractional_pairing`.

    Evaluates ``C l(Q)^(alpha-n) sum_k 2^{-k(alpha-n)} rho_k
    (sum_I |3I cap Q|_sigma)^(1/2) (sum_I |3I cap Q|_omega)^(1/2)`` where
    ``rho_k = 2^{-k theta} sqrt(|9Q|_sigma |9Q|_omega)`` is the scale bound
    granted by diagonal reverse doubling.  If the data exceed it at some scale
    (finite boxes truncate dilated cubes), the measured
    ``max_I sqrt(|3I cap Q|_sigma |3I cap Q|_omega)`` is used there, so the
    result always majorizes the pairing.
    """
    n = sigma.dimension
    _check_alpha(alpha, n)
    if theta <= n - alpha:
        raise MeasureError("theta must exceed n - alpha (shell series diverges otherwise)")
    C = covering_constant(n, alpha)
    nine = Q.dilate(9.0)
    big = math.sqrt(cube_mass(sigma, nine) * cube_mass(omega, nine))
    ell = Q.side
    K = grid_depth(sigma, Q) + 1
    terms = np.zeros(K + 1)
    ok = np.ones(K + 1, dtype=bool)
    for k in range(K + 1):
        lo, hi = _tripled_pieces(Q, k)
        a = box_masses(sigma, lo, hi)
        b = box_masses(omega, lo, hi)
        measured = float(np.sqrt(np.max(a * b))) if len(a) else 0.0
        rho = 2.0 ** (-k * theta) * big
        if measured > rho * (1 + 1e-12):
            ok[k] = False
            rho = measured
        terms[k] = 2.0 ** (-k * (alpha - n)) * rho * math.sqrt(a.sum() * b.sum())
    # unresolved scales: sum_I |3I cap Q| <= 3^n |Q|, and inside one cell
    # |3I cap Q| <= 3^n |I| * (max cell density)
    h = sigma.cell_size
    dens = math.sqrt(sigma.mass.max(initial=0) * omega.mass.max(initial=0)) / h ** n
    sq = 3 ** n * math.sqrt(cube_mass(sigma, Q) * cube_mass(omega, Q))
    c1 = theta + alpha - n
    tail_a = big * 2.0 ** (-(K + 1) * c1) / (1 - 2.0 ** (-c1))
    tail_b = 3 ** n * ell ** n * dens * 2.0 ** (-(K + 1) * alpha) / (1 - 2.0 ** (-alpha))
    tail = sq * max(tail_a, tail_b)
    value = C * ell ** (alpha - n) * (terms.sum() + tail)
    if detail:
        return ShellBound(value, C * ell ** (alpha - n) * terms, C * ell ** (alpha - n) * tail, ok)
    return value


# -- fractional maximal function -------------------------------------------

def _maximal_levels(mu: GridMeasure, Q: Cube, beta: float, cutoff: int):
    """Yield ``(centers, frac, M_j)`` where ``M_j`` is the running maximum of
    ``s^(beta-n) |R|_{1_Q mu}`` over candidate cubes ``R`` of side ``s >= 2^-j l(Q)``.
    """
    n = mu.dimension
    if not 0 < beta < n:
        raise MeasureError(f"beta must lie in (0, {n}), got {beta}")
    nu = restrict(mu, Q)
    h = mu.cell_size
    box_lo = np.asarray(mu.box.corner)
    qlo = np.asarray(Q.corner)
    i_lo = np.maximum(np.floor((qlo - box_lo) / h + 1e-9).astype(np.int64), 0)
    i_hi = np.minimum(np.ceil((qlo + Q.side - box_lo) / h - 1e-9).astype(np.int64), mu.cells_per_side)
    axes = [np.arange(a, b) for a, b in zip(i_lo, i_hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    cells = np.stack([g.ravel() for g in grids], axis=1)
    centers = box_lo + (cells + 0.5) * h
    lo_c = np.maximum(box_lo + cells * h, qlo)
    hi_c = np.minimum(box_lo + (cells + 1) * h, qlo + Q.side)
    frac = np.prod(np.clip(hi_c - lo_c, 0, None), axis=1) / h ** n
    best = np.zeros(len(cells))
    for j in range(cutoff + 1):
        if len(nu.mass):
            s = Q.side / (1 << j)
            for shift in (0.0, 0.5):
                # all candidate cubes of this grid meeting Q, indexed 0..m-1 per axis
                m = (1 << j) + (1 if shift else 0)
                g = np.clip(np.floor((centers - qlo) / s + shift).astype(np.int64), 0, m - 1)
                idx = np.stack([a.ravel() for a in np.meshgrid(*([np.arange(m)] * n), indexing="ij")], axis=1)
                lo = qlo + (idx - shift) * s
                vals = s ** (beta - n) * box_masses(nu, lo, lo + s)
                np.maximum(best, vals[np.ravel_multi_index(tuple(g.T), (m,) * n)], out=best)
        yield centers, frac, best


def maximal_function_on_cells(mu: GridMeasure, Q: Cube, beta: float, cutoff: int):
    """``M^beta(1_Q mu)`` at the centers of the grid cells meeting ``Q``.

    Candidates are the dyadic subcubes of ``Q`` with side ``2^-j l(Q)``,
    ``0 <= j <= cutoff``, and their half-shifted translates.  Returns the
    cell centers, the fraction of each cell inside ``Q`` and the values.
    """
    for centers, frac, best in _maximal_levels(mu, Q, beta, cutoff):
        pass
    return centers, frac, best


def fractional_maximal_energy(mu: GridMeasure, Q: Cube, beta: float, cutoff: int) -> float:
    """``int_Q M^beta(1_Q mu)(x)^2 dx`` evaluated at cell centers."""
    _, frac, vals = maximal_function_on_cells(mu, Q, beta, cutoff)
    return float(np.sum(vals ** 2 * frac)) * mu.cell_size ** mu.dimension


def maximal_energy_profile(mu: GridMeasure, Q: Cube, beta: float, cutoff: int) -> np.ndarray:
    """``fractional_maximal_energy`` for every cutoff ``0..cutoff`` in one pass."""
    vol = mu.cell_size ** mu.dimension
    return np.array([float(np.sum(b ** 2 * f)) * vol for _, f, b in _maximal_levels(mu, Q, beta, cutoff)])


# -- Haar trees and the dyadic Hilbert transform --------------------------------

class HaarTree:
    """Averages ``E_I`` and differences ``Delta_I = E_{I-} - E_{I+}`` of a step
    function on the dyadic intervals of ``[0, 1)`` down to depth ``M``.

    ``averages[k]`` holds the ``2**k`` averages at level ``k`` (left to right);
    ``differences[k]`` the ``2**k`` differences for ``k < M``.
    """

    def __init__(self, leaves):
        leaves = np.asarray(leaves, dtype=float).ravel()
        M = int(round(math.log2(len(leaves)))) if len(leaves) else -1
        if M < 0 or (1 << M) != len(leaves):
            raise MeasureError("leaf count must be a power of two")
        if not np.all(np.isfinite(leaves)):
            raise MeasureError("leaf values must be finite")
        self.depth = M
        avgs = [leaves]
        for _ in range(M):
            child = avgs[-1]
            avgs.append((child[0::2] + child[1::2]) / 2)
        self.averages = avgs[::-1]
        self.differences = [self.averages[k + 1][0::2] - self.averages[k + 1][1::2]
                            for k in range(M)]

    @property
    def leaves(self) -> np.ndarray:
        return self.averages[-1]

    def reconstruct(self) -> np.ndarray:
        """Unroll leaves from the top average and the differences."""
        cur = self.averages[0].copy()
        for d in self.differences:
            nxt = np.empty(2 * len(cur))
            nxt[0::2] = cur + d / 2
            nxt[1::2] = cur - d / 2
            cur = nxt
        return cur


def haar_tree(w) -> HaarTree:
    return HaarTree(w)


def dyadic_hilbert(v: HaarTree, x) -> np.ndarray | float:
    """``H^dy v(x) = (1/2) sum_{I contains x} Delta_I v`` for ``x`` in ``[0, 1)``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((xs < 0) | (xs >= 1)):
        raise MeasureError("points must lie in [0, 1)")
    out = np.zeros(len(xs))
    for k, d in enumerate(v.differences):
        out += d[np.floor(xs * (1 << k)).astype(np.int64)]
    out /= 2
    return out if np.ndim(x) else float(out[0])


def hilbert_on_leaves(v: HaarTree) -> np.ndarray:
    """``H^dy v`` on each depth-``M`` leaf (it is constant there)."""
    out = np.zeros(1 << v.depth)
    for k, d in enumerate(v.differences):
        out += np.repeat(d, 1 << (v.depth - k))
    return out / 2


def pairing(u: HaarTree, v: HaarTree) -> float:
    """``int_0^1 H^dy v * u dx = (1/2) sum_I (Delta_I v)(E_I u)|I|``."""
    if u.depth != v.depth:
        raise MeasureError("trees must have equal depth")
    total = 0.0
    for k, d in enumerate(v.differences):
        total += float(np.dot(d, u.averages[k])) / (1 << k)
    return total / 2
