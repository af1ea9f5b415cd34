"""Invariant measure estimates and integration against them.

Three representations share one interface (``support()`` returning points and
weights):

* :class:`EmpiricalMeasure` -- time average along one trajectory, or an
  explicit weighted point set;
* :class:`UlamDensity` -- fixed vector of a binned transfer matrix (1-D only);
* :func:`finite_orbit_invariant` -- exact stationary vector when the orbit of a
  start point is finite (e.g. chains embedded with constant maps).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse

from .errors import ConvergenceError, DimError, DomainError, NumericError
from .operator import Observable, ObservableFamily, apply_U_points, as_observable
from .rng import as_seed
from .sampler import sample_path
from .system import MarkovSystem

SUPPORT_CAP = 10 ** 6
DEFAULT_BURN_IN = 1000


@dataclass
class EmpiricalMeasure:
    system: MarkovSystem
    points: np.ndarray  # (m, dim)
    weights: np.ndarray | None = None  # None means equal weights
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.system.dim)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.points.shape[0],) or np.any(w < 0):
                raise ValueError("weights must be nonnegative, one per point")
            self.weights = w / w.sum()
        if np.any(self.system.locate_vec(self.points) < 0):
            raise DomainError("support point outside every vertex box")

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.points.shape[0]
        w = np.full(m, 1.0 / m) if self.weights is None else self.weights
        return self.points, w

    def to_csv(self) -> str:
        pts, w = self.support()
        buf = io.StringIO()
        buf.write(",".join([f"x{j}" for j in range(pts.shape[1])] + ["weight"]) + "\n")
        for p, wi in zip(pts, w):
            buf.write(",".join("%.17g" % c for c in p) + ",%.17g\n" % wi)
        return buf.getvalue()


@dataclass
class UlamDensity:
    system: MarkovSystem
    bin_lo: np.ndarray
    bin_hi: np.ndarray
    mass: np.ndarray
    residual: float
    iterations: int

    @property
    def bins(self) -> int:
        return self.mass.size

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        mid = 0.5 * (self.bin_lo + self.bin_hi)
        return mid.reshape(-1, 1), self.mass

    def to_csv(self) -> str:
        rows = ["bin_lo,bin_hi,mass"]
        rows += ["%.17g,%.17g,%.17g" % t for t in zip(self.bin_lo, self.bin_hi, self.mass)]
        return "\n".join(rows) + "\n"


def estimate_invariant(sys: MarkovSystem, x0, n: int, burn_in: int = DEFAULT_BURN_IN,
                       seed=0, cap: int = SUPPORT_CAP) -> EmpiricalMeasure:
    """Equal-weight measure on ``X_{burn_in+1} .. X_n`` of one trajectory from ``x0``.

    Longer stretches are thinned at evenly spaced indices down to ``cap`` points.
    """
    if not n > burn_in >= 0:
        raise ValueError("need n > burn_in >= 0")
    traj = sample_path(sys, x0, n, seed)
    pts = traj.states[burn_in + 1:]
    count = pts.shape[0]
    if count > cap:
        pts = pts[(np.arange(cap) * count) // cap]
    seed = as_seed(seed)
    return EmpiricalMeasure(sys, pts, None, {"x0": list(traj.x0), "n": n, "burn_in": burn_in,
                                             "seed": [seed.master, seed.replica]})


def integrate(m, f, sys: MarkovSystem | None = None) -> float:
    """Weighted mean of an observable, or ``sum_e int p_e f_e dm`` for a per-edge family.

    Summed with ``math.fsum`` so constants integrate to within a few ulps even
    on million-point supports.

    For a family each support point contributes only through the outgoing
    edges of its own vertex, and ``p_e = 0`` kills the term even where ``f_e``
    is infinite.
    """
    sys = sys or m.system
    X, w = m.support()
    V = sys.locate_vec(X)
    if isinstance(f, ObservableFamily):
        return math.fsum(w * family_density(sys, f, X, V))
    vals = as_observable(f, sys.dim).evaluate(sys, X, V)
    return math.fsum(w * vals)


def family_density(sys: MarkovSystem, fam: ObservableFamily, X: np.ndarray,
                   V: np.ndarray) -> np.ndarray:
    """Pointwise ``sum_{e from V(x)} p_e(x) f_e(x)``."""
    out = np.zeros(X.shape[0])
    for vi, edges in enumerate(sys.out_edges):
        rows = np.flatnonzero(V == vi)
        if rows.size == 0:
            continue
        Xv = X[rows]
        for i in edges:
            p = sys.prob_vec[i](Xv)
            with np.errstate(all="ignore"):
                fv = fam.vector[i](Xv) if np.all(p > 0) else _finite_where(fam, i, Xv, p > 0)
            out[rows] += np.where(p > 0, p * fv, 0.0)
    return out


def _finite_where(fam, i, X, keep):
    fv = np.zeros(X.shape[0])
    if keep.any():
        fv[keep] = fam.vector[i](X[keep])
    return fv


def _partition(sys: MarkovSystem, bins: int):
    lengths = np.array([v.box[0][1] - v.box[0][0] for v in sys.vertices])
    counts = np.maximum(1, np.round(bins * lengths / lengths.sum()).astype(int))
    counts[np.argmax(counts)] += bins - counts.sum()
    if np.any(counts < 1):
        raise ValueError("too few bins for the number of vertices")
    edges = [np.linspace(v.box[0][0], v.box[0][1], c + 1) for v, c in zip(sys.vertices, counts)]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return edges, offsets


def ulam_matrix(sys: MarkovSystem, bins: int):
    """Row-stochastic ``T[i, j] = sum_e p_e(mid_i) |w_e(bin_i) & bin_j| / |w_e(bin_i)|``.

    Images are taken as the interval spanned by the images of the bin ends;
    a degenerate image (constant map) puts its whole weight on the bin holding it.
    """
    if sys.dim != 1:
        raise DimError("Ulam discretisation is implemented for dim=1 only")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    grids, offsets = _partition(sys, bins)
    lo = np.concatenate([g[:-1] for g in grids])
    hi = np.concatenate([g[1:] for g in grids])
    rows, cols, vals = [], [], []
    for i, e in enumerate(sys.edges):
        s, t = sys.edge_source[i], sys.edge_target[i]
        src = np.arange(offsets[s], offsets[s + 1])
        tgrid = grids[t]
        mid = 0.5 * (lo[src] + hi[src])
        p = sys.prob_vec[i](mid.reshape(-1, 1))
        a = sys.map_vec[i](lo[src].reshape(-1, 1))[:, 0]
        b = sys.map_vec[i](hi[src].reshape(-1, 1))[:, 0]
        a, b = np.minimum(a, b), np.maximum(a, b)
        scale = tgrid[-1] - tgrid[0]
        nb = tgrid.size - 1
        for r, pi, ai, bi in zip(src, p, a, b):
            if bi - ai <= 1e-14 * scale:
                j = min(max(int(np.searchsorted(tgrid, ai, side="right")) - 1, 0), nb - 1)
                rows.append(r), cols.append(offsets[t] + j), vals.append(pi)
                continue
            j0 = max(int(np.searchsorted(tgrid, ai, side="right")) - 1, 0)
            j1 = min(int(np.searchsorted(tgrid, bi, side="left")), nb)
            for j in range(j0, j1):
                ov = min(bi, tgrid[j + 1]) - max(ai, tgrid[j])
                if ov > 0:
                    rows.append(r), cols.append(offsets[t] + j), vals.append(pi * ov / (bi - ai))
    T = sparse.csr_matrix((vals, (rows, cols)), shape=(bins, bins))
    return T, lo, hi


def ulam_invariant(sys: MarkovSystem, bins: int, tol: float = 1e-12,
                   max_iter: int = 10 ** 5, accept: float = 1e-8) -> UlamDensity:
    """Fixed mass vector of the Ulam matrix by power iteration from the uniform vector.

    Stops once the L1 change per step is at most ``tol``; raises
    :class:`ConvergenceError` if it is still above ``accept`` after ``max_iter``.
    """
    T, lo, hi = ulam_matrix(sys, bins)
    TT = T.T.tocsr()
    v = np.full(bins, 1.0 / bins)
    residual, it = np.inf, 0
    while it < max_iter:
        it += 1
        nv = TT @ v
        nv /= nv.sum()
        residual = float(np.abs(nv - v).sum())
        v = nv
        if residual <= tol:
            break
    if residual > accept:
        raise ConvergenceError(f"Ulam power iteration residual {residual:.3g} after {it} steps")
    return UlamDensity(sys, lo, hi, v, residual, it)


def finite_orbit_invariant(sys: MarkovSystem, x0, max_states: int = 10_000,
                           decimals: int = 12) -> EmpiricalMeasure:
    """Exact stationary weights on the (finite) forward orbit of ``x0``.

    Points are identified after rounding to ``decimals`` places; the
    stationary vector solves ``pi P = pi, sum(pi) = 1`` by least squares.
    """
    start = sys.point(x0)
    key = lambda p: tuple(round(c, decimals) for c in p)  # noqa: E731
    index = {key(start): 0}
    states = [start]
    trans: list[list[tuple[int, float]]] = []
    k = 0
    while k < len(states):
        x = states[k]
        vi = sys.locate(x)
        row = []
        for i in sys.out_edges[vi]:
            y = sys.map_fn[i](x)
            ky = key(y)
            if ky not in index:
                if len(states) >= max_states:
                    raise NumericError(f"orbit of {start} exceeds {max_states} points")
                index[ky] = len(states)
                states.append(y)
            row.append((index[ky], sys.prob_fn[i](x)))
        trans.append(row)
        k += 1
    n = len(states)
    P = np.zeros((n, n))
    for a, row in enumerate(trans):
        for b, p in row:
            P[a, b] += p
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return EmpiricalMeasure(sys, np.array(states), pi, {"x0": list(start), "orbit": n,
                                                         "method": "finite-orbit"})


def invariance_residual(sys: MarkovSystem, m, test_gs: Iterable) -> float:
    """``max_g |int Ug dm - int g dm|`` over the test observables."""
    gs = [as_observable(g, sys.dim) for g in test_gs]
    if not gs:
        raise ValueError("test_gs must be nonempty")
    X, w = m.support()
    V = sys.locate_vec(X)
    worst = 0.0
    for g in gs:
        Ug = apply_U_points(sys, g, X, V)
        worst = max(worst, abs(float(np.dot(w, Ug)) - float(np.dot(w, g.evaluate(sys, X, V)))))
    return worst


__all__ = ["EmpiricalMeasure", "UlamDensity", "Observable", "estimate_invariant", "integrate",
           "ulam_invariant", "ulam_matrix", "finite_orbit_invariant", "invariance_residual"]
