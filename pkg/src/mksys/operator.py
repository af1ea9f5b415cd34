"""The Markov operator ``(Ug)(x) = sum_e p_e(x) g(w_e x)``: exact path-tree
evaluation, Monte Carlo estimation, and Cesaro averages of ``U^k g(x)``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DomainError, ParseError, SizeError
from .expr import Call, Expr, Lit, Var, compile_scalar, compile_vector, parse_expr
from .rng import RngSeed, as_seed
from .sampler import LEAF_CAP, endpoints_mc
from .system import MarkovSystem

SUM_BLOCK = 4096
MC_REPLICAS = 10_000


def ordered_sum(values: np.ndarray, block: int = SUM_BLOCK) -> float:
    """Sum in fixed blocks, then sum the block partials; bit-stable for a given ``block``."""
    if values.size <= block:
        return float(np.sum(values))
    partials = [np.sum(values[i:i + block]) for i in range(0, values.size, block)]
    return float(np.sum(partials))


@dataclass(frozen=True)
class Observable:
    """A function on the state space, one expression shared by all vertices
    unless ``per_vertex`` overrides it."""

    default: Optional[Expr] = None
    per_vertex: Mapping[str, Expr] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_default_fn",
                           compile_vector(self.default) if self.default is not None else None)
        object.__setattr__(self, "_vertex_fn",
                           {k: compile_vector(v) for k, v in self.per_vertex.items()})

    @classmethod
    def parse(cls, src: str, dim: int = 1) -> "Observable":
        return cls(parse_expr(src, dim))

    @classmethod
    def constant(cls, c: float) -> "Observable":
        return cls(Lit(float(c)))

    @classmethod
    def coordinate(cls, j: int = 0) -> "Observable":
        return cls(Var(j))

    def evaluate(self, sys: MarkovSystem, X: np.ndarray, V: np.ndarray | None = None) -> np.ndarray:
        if V is None:
            V = sys.locate_vec(X)
        out = np.empty(X.shape[0])
        done = np.zeros(X.shape[0], dtype=bool)
        for vid, fn in self._vertex_fn.items():
            rows = np.flatnonzero(V == sys.vertex_pos[vid])
            if rows.size:
                out[rows] = fn(X[rows])
                done[rows] = True
        rest = np.flatnonzero(~done)
        if rest.size:
            if self._default_fn is None:
                raise DomainError("observable undefined on some vertex")
            out[rest] = self._default_fn(X[rest])
        return out

    def at(self, sys: MarkovSystem, x) -> float:
        pt = np.array([sys.point(x)])
        return float(self.evaluate(sys, pt)[0])


class ObservableFamily:
    """Per-edge functions ``f_e``, each evaluated on the source box of ``e``.

    Edges without an entry contribute ``f_e = 0``.
    """

    def __init__(self, sys: MarkovSystem, exprs: Mapping[str, Expr], name: str = "custom"):
        unknown = set(exprs) - set(sys.edge_pos)
        if unknown:
            raise KeyError(f"unknown edges in family: {sorted(unknown)}")
        self.name = name
        self.exprs = [exprs.get(e.id, Lit(0.0)) for e in sys.edges]
        self.scalar = [compile_scalar(e) for e in self.exprs]
        self.vector = [compile_vector(e) for e in self.exprs]

    @classmethod
    def log_p(cls, sys: MarkovSystem) -> "ObservableFamily":
        """``f_e = log p_e``: Birkhoff averages become normalised path log-probabilities."""
        return cls(sys, {e.id: Call("log", e.prob) for e in sys.edges}, "log_p")

    @classmethod
    def constant(cls, sys: MarkovSystem, c: float) -> "ObservableFamily":
        return cls(sys, {e.id: Lit(float(c)) for e in sys.edges}, f"constant({c})")

    @classmethod
    def occupancy(cls, sys: MarkovSystem, vertex: str | None = None) -> "ObservableFamily":
        """``f_e = 1`` iff edge ``e`` lands in ``vertex`` (default: the first vertex)."""
        vertex = vertex or sys.vertices[0].id
        if vertex not in sys.vertex_pos:
            raise KeyError(f"unknown vertex {vertex!r}")
        return cls(sys, {e.id: Lit(1.0 if e.target == vertex else 0.0) for e in sys.edges},
                   f"occupancy({vertex})")

    @classmethod
    def edge_frequency(cls, sys: MarkovSystem, edge: str) -> "ObservableFamily":
        sys.edge_index(edge)
        return cls(sys, {edge: Lit(1.0)}, f"edge({edge})")

    @classmethod
    def parse(cls, sys: MarkovSystem, src: str, name: str = "file") -> "ObservableFamily":
        """Read ``<edge_id> = <expr>`` lines; ``#`` starts a comment."""
        exprs = {}
        for lineno, line in enumerate(src.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, rhs = line.partition("=")
            if not sep:
                raise ParseError("expected '<edge> = <expr>'", expected="=", found=line,
                                 line=lineno, column=1)
            exprs[key.strip()] = parse_expr(rhs.strip(), sys.dim)
        return cls(sys, exprs, name)

    def edge_values(self, i: int, X: np.ndarray) -> np.ndarray:
        return self.vector[i](X)


def as_observable(g, dim: int = 1) -> Observable:
    if isinstance(g, Observable):
        return g
    if isinstance(g, Expr):
        return Observable(g)
    if isinstance(g, str):
        return Observable.parse(g, dim)
    if isinstance(g, (int, float)):
        return Observable.constant(g)
    raise TypeError(f"cannot use {g!r} as an observable")


def _check_cap(sys: MarkovSystem, k: int):
    if sys.max_out_degree ** k > LEAF_CAP:
        raise SizeError(f"{sys.max_out_degree}^{k} leaves exceed the cap of {LEAF_CAP}")


def expand(sys: MarkovSystem, X: np.ndarray, V: np.ndarray, W: np.ndarray):
    """Children of every frontier node, ordered by (parent, edge declaration order)."""
    parts = []
    for vi, out in enumerate(sys.out_edges):
        rows = np.flatnonzero(V == vi)
        if rows.size == 0:
            continue
        if not out:
            raise DomainError(f"vertex {sys.vertices[vi].id} has no outgoing edges")
        Xv = X[rows]
        for rank, i in enumerate(out):
            p = sys.prob_vec[i](Xv)
            Y = sys.map_vec[i](Xv)
            parts.append((rows, np.full(rows.size, rank), Y, W[rows] * p))
    parent = np.concatenate([p[0] for p in parts])
    rank = np.concatenate([p[1] for p in parts])
    order = np.lexsort((rank, parent))
    Y = np.concatenate([p[2] for p in parts])[order]
    Wn = np.concatenate([p[3] for p in parts])[order]
    Vn = sys.locate_vec(Y)
    if np.any(Vn < 0):
        raise DomainError(f"point {Y[int(np.flatnonzero(Vn < 0)[0])].tolist()} lies in no box")
    return Y, Vn, Wn


def apply_U_exact(sys: MarkovSystem, g, x, k: int) -> float:
    """``(U^k g)(x)`` summed exactly over the depth-``k`` path tree.

    Leaves are ordered depth-first in declared edge order and summed with
    :func:`ordered_sum`.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _check_cap(sys, k)
    g = as_observable(g, sys.dim)
    pt = sys.point(x)
    X = np.array([pt], dtype=float)
    V = np.array([sys.locate(pt)])
    W = np.ones(1)
    for _ in range(k):
        X, V, W = expand(sys, X, V, W)
    return ordered_sum(W * g.evaluate(sys, X, V))


def apply_U_points(sys: MarkovSystem, g, X: np.ndarray, V: np.ndarray | None = None) -> np.ndarray:
    """One application of ``U`` to ``g``, evaluated at every row of ``X``."""
    g = as_observable(g, sys.dim)
    if V is None:
        V = sys.locate_vec(X)
    out = np.zeros(X.shape[0])
    for vi, edges in enumerate(sys.out_edges):
        rows = np.flatnonzero(V == vi)
        if rows.size == 0:
            continue
        Xv = X[rows]
        acc = np.zeros(rows.size)
        for i in edges:
            Y = sys.map_vec[i](Xv)
            acc += sys.prob_vec[i](Xv) * g.evaluate(sys, Y)
        out[rows] = acc
    return out


def apply_U_mc(sys: MarkovSystem, g, x, k: int, replicas: int, seed=0) -> tuple[float, float]:
    """Monte Carlo ``(U^k g)(x)``: mean of ``g(X_k)`` over independent paths and its standard error."""
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    g = as_observable(g, sys.dim)
    X = endpoints_mc(sys, x, k, replicas, as_seed(seed))
    vals = g.evaluate(sys, X)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(replicas))
    return mean, se


def exact_depth_limit(sys: MarkovSystem) -> int:
    d = sys.max_out_degree
    if d <= 1:
        return 1 << 30
    k = 0
    while d ** (k + 1) <= LEAF_CAP:
        k += 1
    return k


@dataclass
class CesaroSeries:
    averages: np.ndarray  # A_1 .. A_{n_max}
    terms: np.ndarray  # U^k g(x), k = 0 .. n_max-1
    std_errors: np.ndarray  # zero where the term is exact
    exact: np.ndarray  # bool per term

    def to_csv(self) -> str:
        rows = ["n,A_n"] + [f"{n},{'%.17g' % a}" for n, a in enumerate(self.averages, start=1)]
        return "\n".join(rows) + "\n"


def cesaro_U(sys: MarkovSystem, g, x, n_max: int, seed=0,
             mc_replicas: int = MC_REPLICAS) -> CesaroSeries:
    """Partial averages ``A_n = (1/n) sum_{k<n} (U^k g)(x)`` for ``n = 1 .. n_max``.

    Terms within the exact leaf cap are computed exactly; deeper terms use
    :func:`apply_U_mc` with ``mc_replicas`` paths and the stream family
    ``seed.child(k)``.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    g = as_observable(g, sys.dim)
    seed = as_seed(seed)
    limit = exact_depth_limit(sys)
    terms, ses, exact = np.zeros(n_max), np.zeros(n_max), np.zeros(n_max, dtype=bool)
    for k in range(n_max):
        if k <= limit:
            terms[k] = apply_U_exact(sys, g, x, k)
            exact[k] = True
        else:
            terms[k], ses[k] = apply_U_mc(sys, g, x, k, mc_replicas, seed.child(k))
    avgs = np.cumsum(terms) / np.arange(1, n_max + 1)
    return CesaroSeries(avgs, terms, ses, exact)


__all__ = ["Observable", "ObservableFamily", "apply_U_exact", "apply_U_mc", "apply_U_points", "cesaro_U",
           "CesaroSeries", "ordered_sum", "RngSeed"]
