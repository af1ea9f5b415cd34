"""Sampling the path process started at a point, and exact cylinder probabilities."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChainError, DomainError, SizeError
from .rng import CounterRNG, RngSeed, as_seed, replica_uniforms
from .system import MarkovSystem

LEAF_CAP = 1 << 20


@dataclass(frozen=True)
class Cylinder:
    """The set of sequences with ``sigma_start .. sigma_{start+k-1} = word``."""

    start: int
    word: tuple[str, ...]

    def check(self, sys: MarkovSystem) -> list[int]:
        return sys.check_word(self.word)


@dataclass
class Trajectory:
    x0: tuple[float, ...]
    edges: np.ndarray  # edge indices sigma_1..sigma_n
    states: np.ndarray  # (n+1, dim): X_0 = x0, X_1, ..., X_n
    logprob_cum: np.ndarray  # (n+1,): running sum of log p_{sigma_{k+1}}(X_k)
    edge_ids: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.edges)

    @property
    def symbols(self) -> list[str]:
        return [self.edge_ids[i] for i in self.edges]

    @property
    def log_prob(self) -> float:
        return float(self.logprob_cum[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        dim = self.states.shape[1]
        buf.write(",".join(["n", "edge_id"] + [f"x{j}" for j in range(dim)] + ["logprob_cum"]))
        buf.write("\n")
        for k in range(self.n + 1):
            eid = self.edge_ids[self.edges[k - 1]] if k else ""
            coords = ",".join("%.17g" % c for c in self.states[k])
            buf.write(f"{k},{eid},{coords},{'%.17g' % self.logprob_cum[k]}\n")
        return buf.getvalue()


def running_sum(values) -> list[float]:
    """Neumaier-compensated prefix sums ``[0, v0, v0+v1, ...]`` as floats."""
    out = [0.0]
    s = c = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out.append(s + c)
    return out


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def _select(sys: MarkovSystem, vi: int, x: tuple, u: float) -> tuple[int, float]:
    """Inverse-CDF choice among the outgoing edges of vertex ``vi`` in declared order."""
    out = sys.out_edges[vi]
    if not out:
        raise DomainError(f"vertex {sys.vertices[vi].id} has no outgoing edges")
    cum = 0.0
    for i in out:
        p = sys.prob_fn[i](x)
        cum += p
        if u < cum:
            return i, p
    return i, p


def _next_vertex(sys: MarkovSystem, i: int, y: tuple) -> int:
    t = sys.edge_target[i]
    if sys.vertices[t].contains(y):
        return t
    return sys.locate(y)


def step(sys: MarkovSystem, x, rng) -> tuple[str, tuple[float, ...]]:
    """One transition from ``x``: draw an edge with probability ``p_e(x)``, apply its map.

    ``rng`` is anything with a ``uniform()`` method returning a float in [0, 1).
    """
    x = sys.point(x)
    vi = sys.locate(x)
    i, _ = _select(sys, vi, x, rng.uniform())
    return sys.edges[i].id, sys.map_fn[i](x)


def sample_path(sys: MarkovSystem, x, n: int, seed=0) -> Trajectory:
    """Sample ``n`` steps of the path process started at ``x``.

    Draw ``k`` of the stream picks edge ``sigma_{k+1}``; the result is a pure
    function of ``(seed, x, n)``. Log-probabilities are accumulated with
    :func:`running_sum`.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    x = sys.point(x)
    vi = sys.locate(x)
    us = CounterRNG(as_seed(seed)).uniforms(n).tolist()
    edges = [0] * n
    states = [x]
    logs = [0.0] * n
    maps = sys.map_fn
    for k in range(n):
        i, p = _select(sys, vi, x, us[k])
        logs[k] = _log(p)
        x = maps[i](x)
        vi = _next_vertex(sys, i, x)
        edges[k] = i
        states.append(x)
    cum = running_sum(logs)
    return Trajectory(states[0], np.array(edges, dtype=np.intp),
                      np.array(states, dtype=float).reshape(n + 1, sys.dim),
                      np.array(cum), tuple(e.id for e in sys.edges))


def cylinder_logprob(sys: MarkovSystem, x, word: Sequence) -> float:
    """``log P_x([e_1 .. e_k])``, composed and summed exactly as :func:`sample_path` does."""
    x = sys.point(x)
    vi = sys.locate(x)
    idx = sys.check_word(word) if len(word) else []
    if idx and sys.edge_source[idx[0]] != vi:
        raise ChainError(f"word starts at {sys.edges[idx[0]].source}, "
                         f"but x lies in {sys.vertices[vi].id}")
    logs = []
    for i in idx:
        logs.append(_log(sys.prob_fn[i](x)))
        x = sys.map_fn[i](x)
    return running_sum(logs)[-1]


def _check_cap(sys: MarkovSystem, k: int):
    if sys.max_out_degree ** k > LEAF_CAP:
        raise SizeError(f"{sys.max_out_degree}^{k} words exceed the cap of {LEAF_CAP}")


def enumerate_cylinders(sys: MarkovSystem, x, k: int) -> list[tuple[tuple[str, ...], float]]:
    """Every chainable length-``k`` word from ``x`` with its exact log-probability.

    Words come out depth-first in declared edge order.
    """
    _check_cap(sys, k)
    x = sys.point(x)
    out: list = []
    ids = [e.id for e in sys.edges]

    def walk(x, vi, word, lp, depth):
        if depth == k:
            out.append((tuple(ids[i] for i in word), lp))
            return
        for i in sys.out_edges[vi]:
            y = sys.map_fn[i](x)
            walk(y, _next_vertex(sys, i, y), word + [i], lp + _log(sys.prob_fn[i](x)), depth + 1)

    walk(x, sys.locate(x), [], 0.0, 0)
    return out


# --------------------------------------------------------------------------
# many independent walkers in lockstep

def step_many(sys: MarkovSystem, X: np.ndarray, V: np.ndarray, U: np.ndarray):
    """Advance every row of ``X`` (in vertices ``V``) with uniforms ``U``.

    Uses the same inverse-CDF rule as :func:`step`. Returns the chosen edge
    indices, the new points, their vertices, and the chosen probabilities.
    """
    m = X.shape[0]
    chosen = np.full(m, -1, dtype=np.intp)
    probs = np.zeros(m)
    Y = np.empty_like(X)
    for vi, out in enumerate(sys.out_edges):
        rows = np.flatnonzero(V == vi)
        if rows.size == 0:
            continue
        if not out:
            raise DomainError(f"vertex {sys.vertices[vi].id} has no outgoing edges")
        Xv, Uv = X[rows], U[rows]
        sel = np.full(rows.size, -1, dtype=np.intp)
        selp = np.zeros(rows.size)
        cum = np.zeros(rows.size)
        for i in out:
            p = sys.prob_vec[i](Xv)
            cum = cum + p
            hit = (sel < 0) & (Uv < cum)
            sel[hit] = i
            selp[hit] = p[hit]
        rest = sel < 0
        sel[rest] = out[-1]
        selp[rest] = p[rest]
        chosen[rows] = sel
        probs[rows] = selp
        for i in out:
            r = sel == i
            if r.any():
                Y[rows[r]] = sys.map_vec[i](Xv[r])
    V_new = sys.locate_vec(Y)
    if np.any(V_new < 0):
        bad = int(np.flatnonzero(V_new < 0)[0])
        raise DomainError(f"point {Y[bad].tolist()} lies in no vertex box")
    return chosen, Y, V_new, probs


def endpoints_mc(sys: MarkovSystem, x, k: int, replicas: int, seed: RngSeed) -> np.ndarray:
    """``X_k`` for ``replicas`` independent paths from ``x``; path ``r`` uses stream ``(master, r)``."""
    x = np.array(sys.point(x), dtype=float)
    X = np.tile(x, (replicas, 1))
    V = np.full(replicas, sys.locate(tuple(x)), dtype=np.intp)
    for c in range(k):
        U = replica_uniforms(seed, replicas, c)
        _, X, V, _ = step_many(sys, X, V, U)
    return X
