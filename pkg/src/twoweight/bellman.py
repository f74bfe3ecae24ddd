"""Bellman value iteration on Omega = {x1 x2 < 1} and certified weight pairs for H^dy.

The value recursion is

    B_{t+1}(x) = max_y  2|y2| x1 + (B_t(x+y) + B_t(x-y)) / 2

over the admissible moves ``y1 in {0, +-(tau/20) x1}``, ``y2 in {+-(tau/20) x2,
+-(tau/40) x2}`` with ``x +- y`` in Omega.  Moves are proportional to ``x``, so
in log coordinates every move is a fixed shift and one sweep is a handful of
shifted, linearly interpolated copies of the field.

Extracted weight pairs are stored level by level as a recombining tree: two
nodes at the same depth whose states have the same product ``x1 x2`` share a
subtree, up to the rescaling ``(U, V) -> (cU, V/c)``.  Averages,
differences and the functional are accumulated bottom-up over that DAG, which
is exact for the full binary tree it encodes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
import numpy as np

from .operators import HaarTree, pairing

LOG_MIN, LOG_MAX = math.log(1e-3), math.log(1e3)
DENSE_DEPTH = 22


def move_menu(tau: float) -> list[tuple[float, float]]:
    """Relative moves ``(y1/x1, y2/x2)`` with ``y2 > 0`` (``-y`` gives the same pair of children)."""
    a = tau / 20
    return [(s1, s2) for s2 in (a, a / 2) for s1 in (0.0, a, -a)]


@dataclass
class BellmanField:
    tau: float
    u: np.ndarray  # log x1 grid
    v: np.ndarray  # log x2 grid
    values: np.ndarray
    moves: np.ndarray  # index into move_menu, -1 where frozen
    iterations: int = 0
    history: list = field(default_factory=list)  # (sweep, max B/sqrt(x1 x2))

    @classmethod
    def empty(cls, tau: float, size: int = 256) -> "BellmanField":
        if not 0 < tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        g = np.linspace(LOG_MIN, LOG_MAX, size)
        return cls(tau, g, g.copy(), np.zeros((size, size)), np.full((size, size), -1, dtype=np.int64))

    @property
    def inside(self) -> np.ndarray:
        return self.u[:, None] + self.v[None, :] < 0

    @property
    def ratio(self) -> np.ndarray:
        """``B / sqrt(x1 x2)`` on the grid (0 off Omega)."""
        p = np.exp(self.u[:, None] + self.v[None, :])
        return np.where(self.inside, self.values / np.sqrt(p), 0.0)

    def best_node(self, interior: bool = False) -> tuple[float, float]:
        """Node maximizing ``B/sqrt(x1 x2)``.

        With ``interior`` the search skips nodes within a factor 10 of the grid
        edge, where clamped reads inflate the field.
        """
        R = self.ratio
        if interior:
            pad = math.log(10.0)
            mu_ = (self.u > self.u[0] + pad) & (self.u < self.u[-1] - pad)
            mv = (self.v > self.v[0] + pad) & (self.v < self.v[-1] - pad)
            R = np.where(mu_[:, None] & mv[None, :], R, 0.0)
        i, j = np.unravel_index(int(np.argmax(R)), self.values.shape)
        return float(math.exp(self.u[i])), float(math.exp(self.v[j]))

    def _padded(self) -> np.ndarray:
        return _ghost_fill(self.values, self.inside)

    def value(self, x1, x2) -> np.ndarray:
        """Bilinear interpolation in log coordinates, clamped to the grid."""
        return _interp(self._padded(), self.u, self.v, np.log(x1), np.log(x2))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "grid": [len(self.u), len(self.v)],
            "iterations": self.iterations,
            "max_ratio": float(self.ratio.max()),
            "best_node": list(self.best_node()),
        }


def _ghost_fill(B: np.ndarray, inside: np.ndarray) -> np.ndarray:
    """Copy of ``B`` with nodes off Omega set to the last in-Omega value of their x1-column.

    B grows with x1 x2, so this under-reports the field near the boundary.
    """
    out = B.copy()
    last = inside.sum(axis=1) - 1  # columns of inside are a prefix in j
    for i in np.flatnonzero(last >= 0):
        out[i, last[i] + 1:] = B[i, last[i]]
    empty = np.flatnonzero(last < 0)
    if len(empty):
        ok = np.flatnonzero(last >= 0)
        if len(ok):
            out[empty] = out[ok[-1]]
    return out


def _interp(B: np.ndarray, u: np.ndarray, v: np.ndarray, qu, qv) -> np.ndarray:
    qu, qv = np.broadcast_arrays(np.asarray(qu, dtype=float), np.asarray(qv, dtype=float))
    du, dv = u[1] - u[0], v[1] - v[0]
    fu = np.clip((qu - u[0]) / du, 0, len(u) - 1)
    fv = np.clip((qv - v[0]) / dv, 0, len(v) - 1)
    i0 = np.minimum(np.floor(fu).astype(np.int64), len(u) - 2)
    j0 = np.minimum(np.floor(fv).astype(np.int64), len(v) - 2)
    tu, tv = fu - i0, fv - j0
    return ((1 - tu) * (1 - tv) * B[i0, j0] + tu * (1 - tv) * B[i0 + 1, j0]
            + (1 - tu) * tv * B[i0, j0 + 1] + tu * tv * B[i0 + 1, j0 + 1])


class _Shift:
    """Precomputed gather for reading ``B`` at ``(u + su, v + sv)`` on the whole grid."""

    def __init__(self, u, v, su, sv):
        du, dv = u[1] - u[0], v[1] - v[0]
        fu = np.clip(np.arange(len(u)) + su / du, 0, len(u) - 1)
        fv = np.clip(np.arange(len(v)) + sv / dv, 0, len(v) - 1)
        self.i0 = np.minimum(np.floor(fu).astype(np.int64), len(u) - 2)
        self.j0 = np.minimum(np.floor(fv).astype(np.int64), len(v) - 2)
        self.tu = (fu - self.i0)[:, None]
        self.tv = (fv - self.j0)[None, :]

    def __call__(self, B):
        i0, j0 = self.i0[:, None], self.j0[None, :]
        return ((1 - self.tu) * (1 - self.tv) * B[i0, j0] + self.tu * (1 - self.tv) * B[i0 + 1, j0]
                + (1 - self.tu) * self.tv * B[i0, j0 + 1] + self.tu * self.tv * B[i0 + 1, j0 + 1])


def bellman_iterate(fld: BellmanField, iterations: int, target: float | None = None,
                    record_every: int = 1) -> BellmanField:
    """Run synchronous sweeps; stop early once ``max B/sqrt(x1 x2)`` exceeds ``target``."""
    tau = fld.tau
    u, v = fld.u, fld.v
    inside = fld.inside
    p = np.exp(u[:, None] + v[None, :])
    x1 = np.exp(u)[:, None] * np.ones((1, len(v)))
    sq = np.sqrt(p)
    menu = move_menu(tau)
    plans = []
    for s1, s2 in menu:
        lp1, lm1 = math.log1p(s1), math.log1p(-s1)
        lp2, lm2 = math.log1p(s2), math.log1p(-s2)
        ok = inside & (u[:, None] + v[None, :] + lp1 + lp2 < 0) & (u[:, None] + v[None, :] + lm1 + lm2 < 0)
        gain = 2 * s2 * np.exp(v)[None, :] * x1
        plans.append((ok, gain, _Shift(u, v, lp1, lp2), _Shift(u, v, lm1, lm2)))
    B = fld.values.copy()
    moves = fld.moves.copy()
    t = fld.iterations
    history = list(fld.history)
    for _ in range(iterations):
        G = _ghost_fill(B, inside)
        new = B.copy()
        arg = moves.copy()
        for k, (ok, gain, plus, minus) in enumerate(plans):
            cand = gain + (plus(G) + minus(G)) / 2
            better = ok & (cand > new)
            new[better] = cand[better]
            arg[better] = k
        B, moves = new, arg
        t += 1
        best = float(np.max(np.where(inside, B / sq, 0.0)))
        if t % record_every == 0:
            history.append((t, best))
        if target is not None and best > target:
            break
    return BellmanField(tau, u, v, B, moves, t, history)


def concavity_defect(fld: BellmanField, x, y) -> float:
    """``(B(x+y) + B(x-y))/2 + 2|y2| x1 - B(x)``; nonpositive for a finite Bellman function."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for pt in (x, x + y, x - y):
        if np.any(pt <= 0) or pt[0] * pt[1] >= 1:
            raise ValueError(f"point {pt} lies outside Omega")
    G = fld._padded()
    val = lambda q: float(_interp(G, fld.u, fld.v, math.log(q[0]), math.log(q[1])))
    if not np.any(y):
        return 0.0
    return (val(x + y) + val(x - y)) / 2 + 2 * abs(y[1]) * x[0] - val(x)


# -- weight pairs ----------------------------------------------------------------

@dataclass
class WeightPair:
    """A pair ``(U, V)`` on ``[0, 1)`` constant on the depth-``M`` dyadic leaves.

    ``children[d]`` is an ``(m_d, 2)`` array giving, for each node at depth
    ``d``, its left and right child among the nodes at depth ``d + 1``;
    ``leaf_u``/``leaf_v`` hold the values at depth ``M``.  A dense pair has
    ``m_d = 2**d``.

    Nodes may be shared up to the symmetry ``(U, V) -> (cU, V/c)``:
    ``scales[d]`` (same shape as ``children[d]``) holds the factor ``c``
    applied to each child subtree, and ``root_scale`` the one applied to the
    whole tree.  Products, sibling ratios and ``Delta V * E U`` are invariant
    under it, so all checks can run on the shared nodes directly.
    """

    children: list
    leaf_u: np.ndarray
    leaf_v: np.ndarray
    tau: float | None = None
    start: tuple | None = None
    scales: list | None = None
    root_scale: float = 1.0

    def __post_init__(self):
        self.leaf_u = np.asarray(self.leaf_u, dtype=float)
        self.leaf_v = np.asarray(self.leaf_v, dtype=float)
        if np.any(self.leaf_u <= 0) or np.any(self.leaf_v <= 0):
            raise ValueError("weights must be positive")
        if self.scales is None:
            self.scales = [np.ones(c.shape) for c in self.children]

    @classmethod
    def from_leaves(cls, u, v, tau: float | None = None) -> "WeightPair":
        u = np.asarray(u, dtype=float).ravel()
        v = np.asarray(v, dtype=float).ravel()
        M = int(round(math.log2(len(u)))) if len(u) else -1
        if M < 0 or (1 << M) != len(u) or len(v) != len(u):
            raise ValueError("need 2**M leaf values for both weights")
        kids = [np.stack([np.arange(0, 2 << d, 2), np.arange(1, 2 << d, 2)], axis=1) for d in range(M)]
        return cls(kids, u, v, tau)

    @property
    def depth(self) -> int:
        return len(self.children)

    @property
    def node_count(self) -> int:
        return 1 + sum(len(c) for c in self.children)

    def _child_averages(self, d: int, eu: np.ndarray, ev: np.ndarray):
        """Scaled ``(E U, E V)`` of the left and right child of every node at depth ``d``."""
        kids, c = self.children[d], self.scales[d]
        lu, ru = c[:, 0] * eu[kids[:, 0]], c[:, 1] * eu[kids[:, 1]]
        lv, rv = ev[kids[:, 0]] / c[:, 0], ev[kids[:, 1]] / c[:, 1]
        return lu, ru, lv, rv

    def averages(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """``(E_I U, E_I V)`` per depth and node, computed bottom-up from the leaves.

        Values are those of the shared node; the root entry includes ``root_scale``.
        """
        out = [(self.leaf_u, self.leaf_v)]
        for d in range(self.depth - 1, -1, -1):
            lu, ru, lv, rv = self._child_averages(d, *out[-1])
            out.append(((lu + ru) / 2, (lv + rv) / 2))
        out = out[::-1]
        out[0] = (out[0][0] * self.root_scale, out[0][1] / self.root_scale)
        return out

    def leaves(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense leaf tables (only for moderate depth)."""
        if self.depth > DENSE_DEPTH:
            raise ValueError(f"depth {self.depth} is too large for dense leaves")
        idx = np.zeros(1, dtype=np.int64)
        c = np.full(1, float(self.root_scale))
        for kids, sc in zip(self.children, self.scales):
            c = (c[:, None] * sc[idx]).ravel()
            idx = kids[idx].ravel()
        return self.leaf_u[idx] * c, self.leaf_v[idx] / c

    def trees(self) -> tuple[HaarTree, HaarTree]:
        u, v = self.leaves()
        return HaarTree(u), HaarTree(v)

    def functional(self, absolute: bool = False) -> float:
        """``sum_I (Delta_I V)(E_I U)|I|`` over the whole tree."""
        avg = self.averages()
        acc = np.zeros(len(self.leaf_u))
        for d in range(self.depth - 1, -1, -1):
            kids = self.children[d]
            eu = avg[d][0] / (self.root_scale if d == 0 else 1.0)
            _, _, lv, rv = self._child_averages(d, *avg[d + 1])
            dv = lv - rv
            if absolute:
                dv = np.abs(dv)
            acc = dv * eu + (acc[kids[:, 0]] + acc[kids[:, 1]]) / 2
        return float(acc[0]) if self.depth else 0.0

    def to_dict(self) -> dict:
        doc = {"depth": self.depth, "nodes": self.node_count, "tau": self.tau,
               "start": list(self.start) if self.start else None}
        if self.depth <= 16:
            u, v = self.leaves()
            doc["leaves_u"] = u.tolist()
            doc["leaves_v"] = v.tolist()
        else:
            doc["children"] = [c.tolist() for c in self.children]
            doc["scales"] = [c.tolist() for c in self.scales]
            doc["root_scale"] = self.root_scale
            doc["leaf_u"] = self.leaf_u.tolist()
            doc["leaf_v"] = self.leaf_v.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "WeightPair":
        start = tuple(doc["start"]) if doc.get("start") else None
        if "leaves_u" in doc:
            pair = cls.from_leaves(doc["leaves_u"], doc["leaves_v"], doc.get("tau"))
            pair.start = start
            return pair
        kids = [np.asarray(c, dtype=np.int64).reshape(-1, 2) for c in doc["children"]]
        scales = [np.asarray(c, dtype=float).reshape(-1, 2) for c in doc["scales"]]
        return cls(kids, doc["leaf_u"], doc["leaf_v"], doc.get("tau"), start, scales, doc.get("root_scale", 1.0))


def _best_moves(fld: BellmanField, G: np.ndarray, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Argmax move index per state (-1 if no move is admissible)."""
    menu = move_menu(fld.tau)
    best = np.full(len(x1), -np.inf)
    arg = np.full(len(x1), -1, dtype=np.int64)
    lu, lv = np.log(x1), np.log(x2)
    for k, (s1, s2) in enumerate(menu):
        pu, pv = lu + math.log1p(s1), lv + math.log1p(s2)
        mu_, mv = lu + math.log1p(-s1), lv + math.log1p(-s2)
        ok = (pu + pv < 0) & (mu_ + mv < 0)
        cand = 2 * s2 * x1 * x2 + (_interp(G, fld.u, fld.v, pu, pv) + _interp(G, fld.u, fld.v, mu_, mv)) / 2
        better = ok & (cand > best)
        best[better] = cand[better]
        arg[better] = k
    return arg


def _product_factors(tau: float) -> np.ndarray:
    a = tau / 20
    return np.log([1 + a, 1 - a, 1 + a / 2, 1 - a / 2])


def _child_keys(tau: float, move: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Increments of the factor counts of ``x1 x2`` for the two children of ``move``.

    Columns count ``(1+a), (1-a), (1+a/2), (1-a/2)`` with ``a = tau/20``.
    """
    a = tau / 20
    col = {a: (0, 1), -a: (1, 0), a / 2: (2, 3), -a / 2: (3, 2)}
    kp, km = np.zeros(4, np.int64), np.zeros(4, np.int64)
    for s in move:
        if s == 0:
            continue
        i, j = next(v for k, v in col.items() if math.isclose(s, k))
        kp[i] += 1
        km[j] += 1
    return kp, km


_KEY_BITS = 12
_KEY_WEIGHTS = np.array([1 << (_KEY_BITS * i) for i in range(4)], dtype=np.int64)


def extract_weight_pair(fld: BellmanField, start, depth: int | None = None,
                        gamma: float | None = None, max_depth: int = 2000,
                        max_nodes: int = 5_000_000) -> WeightPair:
    """Grow a pair from ``start`` following the field's argmax moves.

    The value function only depends on ``p = x1 x2`` up to discretization, so
    every node is represented by the point ``(sqrt p, sqrt p)`` and the move
    is read off the field there; the true state is that point rescaled by
    ``(c, 1/c)``, which is recorded on the edges.  Nodes at the same depth
    with the same ``p`` share a subtree.  The left child receives ``x + y``
    with ``y2 > 0``, so every ``Delta_I V`` is nonnegative.  Nodes with no
    admissible move split into two equal children.  Growth stops at
    ``depth``, or (with ``gamma``) as soon as the functional, accumulated
    top-down, exceeds ``gamma sqrt(x1 x2)``, or with a warning once the pair
    holds more than ``max_nodes`` nodes in total.
    """
    tau = fld.tau
    x0 = np.asarray(start, dtype=float)
    if x0[0] <= 0 or x0[1] <= 0 or x0[0] * x0[1] >= 1:
        raise ValueError("start must lie in Omega")
    if depth is None and gamma is None:
        raise ValueError("give a depth or a target gamma")
    limit = depth if depth is not None else max_depth
    if limit < 1 or limit >= 1 << (_KEY_BITS - 1):
        raise ValueError(f"depth must lie in [1, {(1 << (_KEY_BITS - 1)) - 1}]")
    p0 = float(x0[0] * x0[1])
    goal = None if gamma is None else gamma * math.sqrt(p0) * (1 + 1e-6)
    lf = _product_factors(tau)
    G = fld._padded()
    menu = move_menu(tau)
    kid_keys = [_child_keys(tau, m) for m in menu]
    counts = np.zeros((1, 4), dtype=np.int64)
    weight = np.ones(1)  # share of [0, 1) carried by each shared node
    children, scales = [], []
    total = 0.0
    stored = 1
    for d in range(limit):
        p = p0 * np.exp(counts @ lf)
        r = np.sqrt(p)
        arg = _best_moves(fld, G, r, r)
        if np.all(arg < 0):
            warnings.warn(f"all moves frozen at depth {d}; pair truncated", RuntimeWarning, stacklevel=2)
            break
        left, right = counts.copy(), counts.copy()
        s1 = np.zeros(len(arg))
        s2 = np.zeros(len(arg))
        for k, (kp, km) in enumerate(kid_keys):
            sel = arg == k
            left[sel] += kp
            right[sel] += km
            s1[sel], s2[sel] = menu[k]
        total += float(np.dot(weight, 2 * s2 * p))
        # child state (r(1 +- s1), r(1 +- s2)) = (c rc, rc / c) with rc = sqrt(p_child)
        sc = np.stack([np.sqrt((1 + s1) / (1 + s2)), np.sqrt((1 - s1) / (1 - s2))], axis=1)
        both = np.concatenate([left, right])
        _, first, inv = np.unique(both @ _KEY_WEIGHTS, return_index=True, return_inverse=True)
        inv = inv.ravel()
        m = len(counts)
        children.append(np.stack([inv[:m], inv[m:]], axis=1))
        scales.append(sc)
        counts = both[first]
        weight = np.bincount(inv, weights=np.concatenate([weight, weight]) / 2, minlength=len(first))
        if goal is not None and total > goal:
            break
        stored += len(counts)
        if stored > max_nodes:
            warnings.warn(f"node budget exceeded at depth {d + 1}; pair truncated", RuntimeWarning, stacklevel=2)
            break
    leaf = np.sqrt(p0 * np.exp(counts @ lf))
    return WeightPair(children, leaf, leaf.copy(), tau, (float(x0[0]), float(x0[1])),
                      scales, math.sqrt(x0[0] / x0[1]))


@dataclass
class Certificate:
    gamma: float
    functional: float
    half_functional: float
    normalized: float
    max_product: float
    worst_product_node: tuple
    ratio_range: tuple
    checks: dict
    passed: bool
    depth: int
    nodes: int

    def to_dict(self) -> dict:
        return {
            "status": "PASS" if self.passed else "FAIL",
            "gamma": self.gamma,
            "functional": self.functional,
            "functional_half_convention": self.half_functional,
            "normalized_functional": self.normalized,
            "max_product": self.max_product,
            "worst_product_node": list(self.worst_product_node),
            "sibling_ratio_range": list(self.ratio_range),
            "checks": self.checks,
            "depth": self.depth,
            "nodes": self.nodes,
        }


def verify_certificate(pair: WeightPair, tau: float, gamma: float) -> Certificate:
    """Check the three conclusions exactly on the finite tree.

    * ``sum_I (Delta_I V)(E_I U)|I| > gamma sqrt(E U * E V)`` on ``[0, 1)``;
    * ``(E_I U)(E_I V) <= 1`` at every node;
    * ``E_{I-}/E_{I+}`` in ``(1 - tau, 1 + tau)`` for both weights at every parent.

    The pairing ``int H^dy V * U`` (with its factor 1/2) is reported alongside;
    for depths that fit in memory it is recomputed through dense Haar trees.
    """
    avg = pair.averages()
    F = pair.functional()
    eu0, ev0 = float(avg[0][0][0]), float(avg[0][1][0])
    norm = F / math.sqrt(eu0 * ev0)
    worst, where = -math.inf, (0, 0)
    for d, (eu, ev) in enumerate(avg):
        prod = eu * ev
        i = int(np.argmax(prod))
        if prod[i] > worst:
            worst, where = float(prod[i]), (d, i)
    lo, hi = math.inf, -math.inf
    for d in range(pair.depth):
        lu, ru, lv, rv = pair._child_averages(d, *avg[d + 1])
        for r in (lu / ru, lv / rv):
            lo, hi = min(lo, float(r.min())), max(hi, float(r.max()))
    if not pair.children:
        lo = hi = 1.0
    half = F / 2
    if pair.depth <= 16:
        tu, tv = pair.trees()
        half = pairing(tu, tv)
    checks = {
        "functional": bool(F > gamma * math.sqrt(eu0 * ev0)),
        "product": bool(worst <= 1.0),
        "doubling": bool(1 - tau < lo and hi < 1 + tau),
    }
    return Certificate(gamma, F, half, norm, worst, where, (lo, hi), checks, all(checks.values()),
                       pair.depth, pair.node_count)


def certify(tau: float = 0.2, gamma: float = 5.0, size: int = 256, max_sweeps: int = 10_000,
            target: float | None = None, depth: int | None = None, fld: BellmanField | None = None):
    """Iterate, start from the best interior node, extract and verify.

    Without an explicit ``depth`` the pair grows until its functional passes
    ``gamma``.
    """
    target = 2 * gamma if target is None else target
    if fld is None:
        fld = bellman_iterate(BellmanField.empty(tau, size), max_sweeps, target=target)
    start = fld.best_node(interior=True)
    if depth is None:
        pair = extract_weight_pair(fld, start, gamma=gamma)
    else:
        pair = extract_weight_pair(fld, start, depth)
    return fld, pair, verify_certificate(pair, tau, gamma)


def rescale_pair(pair: WeightPair, k: int, ell: int) -> WeightPair:
    """Transplant ``pair`` onto ``T[0,1)`` with ``T y = 2^k y + 2^k ell`` (``k <= 0``).

    The result lives on ``[0, 1)`` at depth ``M - k`` and equals 1 off the image.
    """
    if k > 0 or not 0 <= ell < (1 << -k):
        raise ValueError("target interval must be a dyadic subinterval of [0, 1)")
    u, v = pair.leaves()
    M = pair.depth - k
    big_u = np.ones(1 << M)
    big_v = np.ones(1 << M)
    n = len(u)
    big_u[ell * n:(ell + 1) * n] = u
    big_v[ell * n:(ell + 1) * n] = v
    return WeightPair.from_leaves(big_u, big_v, pair.tau)


def rescale_invariance_check(pair: WeightPair, k: int, ell: int, tol: float = 1e-12) -> bool:
    """Averages and the normalized ``|Delta V| E U`` sum survive the dyadic affine rescaling."""
    big = rescale_pair(pair, k, ell)
    s = -k
    u_small, v_small = pair.trees()
    u_big, v_big = big.trees()
    # averages: E_{T I}(S f) = E_I f for every dyadic I of the original tree
    for d in range(pair.depth + 1):
        m = 1 << d
        sl = slice(ell * m, (ell + 1) * m)
        for small, bigt in ((u_small, u_big), (v_small, v_big)):
            if not np.allclose(bigt.averages[d + s][sl], small.averages[d], rtol=tol, atol=tol):
                return False
    ref = sum(float(np.dot(np.abs(v_small.differences[d]), u_small.averages[d])) / (1 << d)
              for d in range(pair.depth))
    got = 0.0
    for d in range(pair.depth):
        m = 1 << d
        sl = slice(ell * m, (ell + 1) * m)
        got += float(np.dot(np.abs(v_big.differences[d + s][sl]), u_big.averages[d + s][sl])) / (1 << (d + s))
    got /= 2.0 ** k  # divide by |T J|
    return abs(got - ref) <= tol * max(1.0, abs(ref))
