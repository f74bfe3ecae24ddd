"""Sparse dyadic-grid representation of positive measures.

A :class:`GridMeasure` stores nonnegative masses on the cells of the level-``L``
dyadic grid of a bounded support box.  Inside each finest cell the measure is
treated as uniformly spread, which makes the mass of an arbitrary cube a
well-defined (multilinear) function of its corners and exact for grid-aligned
cubes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

# dense cumulative tables are built only below this many cells
DENSE_LIMIT = 1 << 23

MEASURE_KINDS = ("lebesgue", "line-measure", "cantor-product", "point-masses", "density-table")


class MeasureError(ValueError):
    """Rejected measure or cube input."""


@dataclass(frozen=True)
class Cube:
    """Axis-parallel cube ``prod_i [corner_i, corner_i + side)``."""

    corner: tuple[float, ...]
    side: float

    def __post_init__(self):
        corner = tuple(float(c) for c in np.atleast_1d(self.corner))
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "side", float(self.side))
        if not len(corner):
            raise MeasureError("cube needs at least one coordinate")
        if not self.side > 0 or not math.isfinite(self.side):
            raise MeasureError(f"cube side must be positive, got {self.side}")

    @classmethod
    def from_center(cls, center: Sequence[float], side: float) -> "Cube":
        c = np.asarray(center, dtype=float)
        return cls(tuple(c - side / 2), side)

    @property
    def dimension(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.corner) + self.side / 2

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.corner) + self.side

    @property
    def volume(self) -> float:
        return self.side ** self.dimension

    def dilate(self, t: float) -> "Cube":
        return dilate(self, t)

    def contains(self, other: "Cube", tol: float = 1e-12) -> bool:
        lo = np.asarray(self.corner)
        return bool(np.all(np.asarray(other.corner) >= lo - tol)
                    and np.all(other.upper <= self.upper + tol))

    def to_dict(self) -> dict:
        return {"corner": list(self.corner), "side": self.side}


def dilate(Q: Cube, t: float) -> Cube:
    """Concentric cube with side ``t * side(Q)``."""
    if not t > 0:
        raise MeasureError(f"dilation factor must be positive, got {t}")
    return Cube.from_center(Q.center, t * Q.side)


@dataclass(frozen=True)
class CubeFamily:
    """A finite list of cubes stored as arrays, for vectorized scans."""

    corners: np.ndarray
    sides: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        corners = np.atleast_2d(np.asarray(self.corners, dtype=float))
        sides = np.atleast_1d(np.asarray(self.sides, dtype=float))
        if corners.shape[0] != sides.shape[0]:
            raise MeasureError("corners and sides disagree in length")
        if np.any(sides <= 0):
            raise MeasureError("cube sides must be positive")
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "sides", sides)

    @classmethod
    def from_cubes(cls, cubes: Iterable[Cube], label: str = "custom") -> "CubeFamily":
        cubes = list(cubes)
        if not cubes:
            raise MeasureError("empty cube family")
        return cls(np.array([q.corner for q in cubes]), np.array([q.side for q in cubes]), label)

    @property
    def dimension(self) -> int:
        return self.corners.shape[1]

    @property
    def centers(self) -> np.ndarray:
        return self.corners + self.sides[:, None] / 2

    def __len__(self) -> int:
        return len(self.sides)

    def __getitem__(self, i: int) -> Cube:
        return Cube(tuple(self.corners[i]), self.sides[i])

    def __iter__(self) -> Iterator[Cube]:
        for i in range(len(self)):
            yield self[i]

    def dilate(self, t: float) -> "CubeFamily":
        if not t > 0:
            raise MeasureError(f"dilation factor must be positive, got {t}")
        s = t * self.sides
        return CubeFamily(self.centers - s[:, None] / 2, s, f"{self.label}*{t:g}")

    def subset(self, mask: np.ndarray) -> "CubeFamily":
        return CubeFamily(self.corners[mask], self.sides[mask], self.label)

    def describe(self) -> dict:
        return {
            "label": self.label,
            "count": len(self),
            "min_side": float(self.sides.min()),
            "max_side": float(self.sides.max()),
        }


def dyadic_family(box: Cube, levels: Iterable[int], shifted: bool = True,
                  inside: bool = True) -> CubeFamily:
    """Dyadic subcubes of ``box`` at the given levels, plus the half-shifted grids.

    With ``inside`` set, shifted cubes sticking out of the box are dropped.
    """
    n = box.dimension
    lo = np.asarray(box.corner)
    corners, sides = [], []
    for j in levels:
        m = 1 << j
        s = box.side / m
        offsets = [0.0, 0.5] if shifted else [0.0]
        for off in offsets:
            if off and j == 0 and inside:
                continue
            idx = np.arange(m) + off
            if off and inside:
                idx = idx[:-1]
            if not len(idx):
                continue
            grids = np.meshgrid(*([idx] * n), indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=1)
            corners.append(lo + s * pts)
            sides.append(np.full(len(pts), s))
    return CubeFamily(np.concatenate(corners), np.concatenate(sides),
                      "dyadic+shifted" if shifted else "dyadic")


@dataclass(frozen=True)
class MeasureSpec:
    """Recipe for one of the generated measures.

    ``kind`` is one of ``MEASURE_KINDS``.  Parameters by kind:

    * ``cantor-product``: ``ratio`` (default 1/3)
    * ``point-masses``: ``points`` (list of coordinates) and ``weights``
    * ``density-table``: ``values``, an array of shape ``(2**j,) * n`` of
      nonnegative densities on the level-``j`` grid of the box
    * ``line-measure``: optional ``axis_height`` (default 0)
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        if self.kind == "cantor-product":
            r = self.ratio
            if not 0 < r < 0.5:
                raise MeasureError(f"Cantor ratio must lie in (0, 1/2), got {float(r)}")

    @property
    def ratio(self) -> Fraction:
        r = self.params.get("ratio", Fraction(1, 3))
        if isinstance(r, str):
            return Fraction(r)
        return Fraction(r).limit_denominator(10**12) if isinstance(r, float) else Fraction(r)

    def ad_order(self, n: int = 1) -> float:
        """Ahlfors-David order of the generated measure."""
        if self.kind == "cantor-product":
            return n * math.log(2) / math.log(1 / float(self.ratio))
        if self.kind == "lebesgue":
            return float(n)
        if self.kind == "line-measure":
            return 1.0
        if self.kind == "point-masses":
            return 0.0
        raise MeasureError("density tables have no fixed order")


class GridMeasure:
    """Nonnegative masses on the level-``L`` dyadic cells of a support box.

    Instances are immutable; the cell table is stored as a lexicographically
    sorted ``(K, n)`` integer index array and a ``(K,)`` mass array, with zero
    cells omitted.
    """

    def __init__(self, dimension: int, level: int, box: Cube, index: np.ndarray,
                 mass: np.ndarray):
        if level < 0:
            raise MeasureError("level must be nonnegative")
        if box.dimension != dimension:
            raise MeasureError("box dimension disagrees with measure dimension")
        index = np.asarray(index, dtype=np.int64).reshape(-1, dimension)
        mass = np.asarray(mass, dtype=float).ravel()
        if len(index) != len(mass):
            raise MeasureError("index and mass arrays differ in length")
        if np.any(~np.isfinite(mass)) or np.any(mass < 0):
            raise MeasureError("masses must be finite and nonnegative")
        if len(index) and (index.min() < 0 or index.max() >= (1 << level)):
            raise MeasureError("cell index outside [0, 2^L)")
        keep = mass > 0
        index, mass = index[keep], mass[keep]
        order = np.lexsort(index.T[::-1]) if len(index) else np.arange(0)
        index, mass = index[order], mass[order]
        if len(index) > 1 and np.any(np.all(np.diff(index, axis=0) == 0, axis=1)):
            raise MeasureError("duplicate cell indices")
        index.setflags(write=False)
        mass.setflags(write=False)
        self.dimension = int(dimension)
        self.level = int(level)
        self.box = box
        self.index = index
        self.mass = mass
        self._dense = None
        self._cum = None

    # -- basic views ---------------------------------------------------
    @classmethod
    def from_cells(cls, dimension: int, level: int, box: Cube,
                   cells: dict[tuple[int, ...], float]) -> "GridMeasure":
        if cells:
            idx = np.array(list(cells.keys()), dtype=np.int64).reshape(-1, dimension)
            m = np.array(list(cells.values()), dtype=float)
        else:
            idx, m = np.zeros((0, dimension), dtype=np.int64), np.zeros(0)
        return cls(dimension, level, box, idx, m)

    @classmethod
    def from_dense(cls, box: Cube, dense: np.ndarray) -> "GridMeasure":
        dense = np.asarray(dense, dtype=float)
        n = dense.ndim
        size = dense.shape[0]
        level = int(round(math.log2(size)))
        if (1 << level) != size or any(s != size for s in dense.shape):
            raise MeasureError("dense table must be (2^L,)*n")
        idx = np.argwhere(dense > 0)
        return cls(n, level, box, idx, dense[tuple(idx.T)])

    @property
    def cells(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(i) for i in ix): float(m) for ix, m in zip(self.index, self.mass)}

    @property
    def cells_per_side(self) -> int:
        return 1 << self.level

    @property
    def cell_size(self) -> float:
        return self.box.side / self.cells_per_side

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def centers(self) -> np.ndarray:
        return np.asarray(self.box.corner) + (self.index + 0.5) * self.cell_size

    def same_grid(self, other: "GridMeasure") -> bool:
        return (self.dimension == other.dimension and self.level == other.level
                and self.box == other.box)

    def dense(self) -> np.ndarray:
        """Full ``(2^L,)*n`` mass array (read-only)."""
        if self._dense is None:
            size = self.cells_per_side ** self.dimension
            if size > DENSE_LIMIT:
                raise MeasureError(f"grid too large for a dense table ({size} cells)")
            d = np.zeros((self.cells_per_side,) * self.dimension)
            if len(self.index):
                d[tuple(self.index.T)] = self.mass
            d.setflags(write=False)
            self._dense = d
        return self._dense

    def _cumulative(self) -> np.ndarray:
        if self._cum is None:
            c = np.pad(self.dense(), [(1, 0)] * self.dimension)
            for ax in range(self.dimension):
                c = np.cumsum(c, axis=ax)
            c.setflags(write=False)
            self._cum = c
        return self._cum

    def scaled(self, c: float) -> "GridMeasure":
        if c < 0:
            raise MeasureError("scale factor must be nonnegative")
        return GridMeasure(self.dimension, self.level, self.box, self.index, self.mass * c)

    def __eq__(self, other):
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return (self.same_grid(other) and np.array_equal(self.index, other.index)
                and np.array_equal(self.mass, other.mass))

    def __repr__(self):
        return (f"GridMeasure(n={self.dimension}, L={self.level}, box={self.box}, "
                f"cells={len(self.mass)}, total={self.total_mass:.6g})")


# -- generators ------------------------------------------------------------

def _full_index(n: int, level: int) -> np.ndarray:
    m = 1 << level
    grids = np.meshgrid(*([np.arange(m)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# Distribution functions are summed to this many generations; every value is
# then a multiple of 2**-CANTOR_DEPTH, so cell masses add up without rounding.
CANTOR_DEPTH = 50


def cantor_cdf(level: int, ratio: Fraction = Fraction(1, 3)) -> np.ndarray:
    """Exact Cantor distribution function at the points ``k / 2**level``.

    The self-similar measure puts mass 1/2 on ``[0, r]`` and on ``[1 - r, 1]``.
    Returns an array of length ``2**level + 1``.
    """
    m = 1 << level
    ratio = Fraction(ratio)
    if not 0 < ratio < Fraction(1, 2):
        raise MeasureError("Cantor ratio must lie in (0, 1/2)")
    if ratio.numerator == 1:
        return _cantor_cdf_unit(level, ratio.denominator)
    out = np.empty(m + 1)
    for k in range(m + 1):
        out[k] = _cantor_cdf_scalar(Fraction(k, m), ratio)
    return out


def _cantor_cdf_unit(level: int, q: int) -> np.ndarray:
    # ratio 1/q: x -> q x on the left piece, q x - (q - 1) on the right one;
    # numerators stay below q * 2**level, denominators stay 2**level
    den = 1 << level
    num = np.arange(den + 1, dtype=object if level > 56 else np.int64)
    acc = np.zeros(den + 1, dtype=np.int64)  # in units of 2**-CANTOR_DEPTH
    active = np.ones(den + 1, dtype=bool)
    for d in range(CANTOR_DEPTH):
        unit = 1 << (CANTOR_DEPTH - d - 1)
        left = active & (q * num <= den)
        right = active & (q * num >= (q - 1) * den)
        gap = active & ~left & ~right
        acc[right | gap] += unit
        active &= ~gap
        num = np.where(left, q * num, np.where(right, q * num - (q - 1) * den, num))
    # remaining generations: only x == 1 keeps the full remaining mass
    acc[active & (num == den)] += 1
    return acc.astype(float) / float(1 << CANTOR_DEPTH)


def _cantor_cdf_scalar(x: Fraction, r: Fraction) -> float:
    acc = 0
    for d in range(CANTOR_DEPTH):
        unit = 1 << (CANTOR_DEPTH - d - 1)
        if x <= r:
            x = x / r
        elif x >= 1 - r:
            acc += unit
            x = (x - (1 - r)) / r
        else:
            acc += unit
            return acc / float(1 << CANTOR_DEPTH)
    if x == 1:
        acc += 1
    return acc / float(1 << CANTOR_DEPTH)


def generate(spec: MeasureSpec, n: int, L: int, box: Cube | None = None) -> GridMeasure:
    """Discretize ``spec`` on the level-``L`` dyadic grid of ``box``."""
    if L < 0:
        raise MeasureError("level must be nonnegative")
    if n < 1:
        raise MeasureError("dimension must be at least 1")
    if box is None:
        box = Cube((0.0,) * n, 1.0)
    if box.dimension != n:
        raise MeasureError("box dimension disagrees with n")
    m = 1 << L
    h = box.side / m
    if spec.kind == "lebesgue":
        idx = _full_index(n, L)
        return GridMeasure(n, L, box, idx, np.full(len(idx), h ** n))

    if spec.kind == "line-measure":
        if n != 2:
            raise MeasureError("line-measure is defined in the plane (n=2)")
        height = float(spec.params.get("axis_height", 0.0))
        row = math.floor((height - box.corner[1]) / h)
        if not 0 <= row < m:
            return GridMeasure(n, L, box, np.zeros((0, 2)), np.zeros(0))
        idx = np.stack([np.arange(m), np.full(m, row)], axis=1)
        return GridMeasure(n, L, box, idx, np.full(m, h))

    if spec.kind == "cantor-product":
        F = cantor_cdf(L, spec.ratio)
        m1 = np.diff(F)
        if n == 1:
            masses = m1
        else:
            masses = m1
            for _ in range(n - 1):
                masses = np.multiply.outer(masses, m1)
        return GridMeasure.from_dense(box, masses.reshape((m,) * n))

    if spec.kind == "point-masses":
        pts = np.atleast_2d(np.asarray(spec.params.get("points", []), dtype=float))
        w = np.atleast_1d(np.asarray(spec.params.get("weights", np.ones(len(pts))), dtype=float))
        if pts.size == 0:
            return GridMeasure(n, L, box, np.zeros((0, n)), np.zeros(0))
        if pts.shape[1] != n or len(w) != len(pts):
            raise MeasureError("point-masses need (k, n) points and k weights")
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise MeasureError("point-mass weights must be nonnegative")
        g = np.floor((pts - np.asarray(box.corner)) / h).astype(np.int64)
        if np.any(g < 0) or np.any(g >= m):
            raise MeasureError("point mass outside the support box")
        cells: dict[tuple[int, ...], float] = {}
        for ix, wi in zip(map(tuple, g), w):
            cells[ix] = cells.get(ix, 0.0) + float(wi)
        return GridMeasure.from_cells(n, L, box, cells)

    if spec.kind == "density-table":
        vals = np.asarray(spec.params["values"], dtype=float)
        if vals.ndim != n or np.any(vals < 0):
            raise MeasureError("density table must be a nonnegative n-dimensional array")
        j = int(round(math.log2(vals.shape[0])))
        if (1 << j) != vals.shape[0] or any(s != vals.shape[0] for s in vals.shape) or j > L:
            raise MeasureError("density table must be (2^j,)*n with j <= L")
        fine = vals
        for ax in range(n):
            fine = np.repeat(fine, 1 << (L - j), axis=ax)
        return GridMeasure.from_dense(box, fine * h ** n)

    raise MeasureError(f"unsupported kind {spec.kind!r}")


def aggregate(mu: GridMeasure, level: int) -> GridMeasure:
    """Sum masses of ``mu`` up to the coarser ``level``."""
    if not 0 <= level <= mu.level:
        raise MeasureError("aggregation level must lie in [0, L]")
    shift = mu.level - level
    coarse = mu.index >> shift
    keys, inv = np.unique(coarse, axis=0, return_inverse=True)
    sums = np.zeros(len(keys))
    np.add.at(sums, inv.ravel(), mu.mass)
    return GridMeasure(mu.dimension, level, mu.box, keys, sums)


# -- cube masses -------------------------------------------------------------

def _interp_cumulative(cum: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of a padded cumulative table at grid coords."""
    n = g.shape[1]
    top = cum.shape[0] - 1
    g = np.clip(g, 0.0, top)
    i0 = np.minimum(np.floor(g).astype(np.int64), top - 1) if top > 0 else np.zeros_like(g, dtype=np.int64)
    t = g - i0
    out = np.zeros(len(g))
    for corner in product((0, 1), repeat=n):
        w = np.ones(len(g))
        ix = []
        for ax, c in enumerate(corner):
            w = w * (t[:, ax] if c else 1.0 - t[:, ax])
            ix.append(i0[:, ax] + c)
        out += w * cum[tuple(ix)]
    return out


def box_masses(mu: GridMeasure, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Masses of axis-parallel boxes ``[lo, hi)`` given as ``(m, n)`` arrays."""
    n = mu.dimension
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    if len(mu.mass) == 0:
        return np.zeros(len(lo))
    glo = (lo - np.asarray(mu.box.corner)) / mu.cell_size
    ghi = (hi - np.asarray(mu.box.corner)) / mu.cell_size
    if mu.cells_per_side ** n <= DENSE_LIMIT:
        cum = mu._cumulative()
        out = np.zeros(len(lo))
        for corner in product((0, 1), repeat=n):
            pts = np.where(np.array(corner, dtype=bool), ghi, glo)
            sign = -1.0 if (n - sum(corner)) % 2 else 1.0
            out += sign * _interp_cumulative(cum, pts)
        return np.maximum(out, 0.0)
    # sparse fallback: per-box volume-fraction overlap
    out = np.empty(len(lo))
    idx = mu.index.astype(float)
    for k in range(len(lo)):
        ov = np.clip(np.minimum(idx + 1, ghi[k]) - np.maximum(idx, glo[k]), 0.0, 1.0)
        out[k] = float(np.dot(np.prod(ov, axis=1), mu.mass))
    return out


def cube_masses(mu: GridMeasure, cubes: CubeFamily | Sequence[Cube]) -> np.ndarray:
    """Masses of many cubes at once (uniform-within-cell model)."""
    if not isinstance(cubes, CubeFamily):
        cubes = CubeFamily.from_cubes(cubes)
    if cubes.dimension != mu.dimension:
        raise MeasureError("cube dimension disagrees with measure dimension")
    return box_masses(mu, cubes.corners, cubes.corners + cubes.sides[:, None])


def cube_mass(mu: GridMeasure, Q: Cube) -> float:
    """``|Q|_mu`` with the measure spread uniformly inside each finest cell."""
    return float(cube_masses(mu, CubeFamily.from_cubes([Q]))[0])


def product_diagonal_mass(sigma: GridMeasure, omega: GridMeasure, Q: Cube) -> float:
    """``|Q x Q|_{sigma x omega} = |Q|_sigma |Q|_omega``."""
    if sigma.dimension != omega.dimension:
        raise MeasureError("measures live in different dimensions")
    return cube_mass(sigma, Q) * cube_mass(omega, Q)


def overlap_fractions(mu: GridMeasure, Q: Cube) -> np.ndarray:
    """Fraction of each populated cell's volume lying inside ``Q``."""
    lo = (np.asarray(Q.corner) - np.asarray(mu.box.corner)) / mu.cell_size
    hi = lo + Q.side / mu.cell_size
    idx = mu.index.astype(float)
    ov = np.clip(np.minimum(idx + 1, hi) - np.maximum(idx, lo), 0.0, 1.0)
    return np.prod(ov, axis=1)


def restrict(mu: GridMeasure, Q: Cube) -> GridMeasure:
    """The measure ``1_Q mu`` on the same grid."""
    f = overlap_fractions(mu, Q)
    return GridMeasure(mu.dimension, mu.level, mu.box, mu.index, mu.mass * f)


# -- measure files -----------------------------------------------------------

def to_json_dict(mu: GridMeasure) -> dict:
    return {
        "dimension": mu.dimension,
        "level": mu.level,
        "box": mu.box.to_dict(),
        "cells": [[*map(int, ix), float(m)] for ix, m in zip(mu.index, mu.mass)],
    }


def from_json_dict(doc: dict) -> GridMeasure:
    try:
        n = int(doc["dimension"])
        box = Cube(tuple(doc["box"]["corner"]), doc["box"]["side"])
        rows = doc["cells"]
        level = int(doc["level"])
    except (KeyError, TypeError) as exc:
        raise MeasureError(f"malformed measure document: {exc}") from None
    idx = np.array([r[:n] for r in rows], dtype=np.int64).reshape(-1, n)
    m = np.array([r[n] for r in rows], dtype=float)
    return GridMeasure(n, level, box, idx, m)


def save(mu: GridMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(mu), fh, indent=1)


def load(path) -> GridMeasure:
    with open(path) as fh:
        return from_json_dict(json.load(fh))


def to_csv(mu: GridMeasure) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"i{k}" for k in range(mu.dimension)] + ["mass"])
    for ix, m in zip(mu.index, mu.mass):
        w.writerow([*map(int, ix), repr(float(m))])
    return buf.getvalue()


def spec_from_dict(doc: dict[str, Any]) -> MeasureSpec:
    doc = dict(doc)
    kind = doc.pop("kind")
    return MeasureSpec(kind, doc)
