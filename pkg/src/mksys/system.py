"""Finite Markov systems: vertex boxes, edges with maps and place-dependent
probabilities, validation, and a sampled contraction coefficient."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import SystemConfig, parse_system_config
from .errors import ChainError, DomainError, NumericError
from .expr import Expr, compile_scalar, compile_vector, to_source
from .rng import CounterRNG, as_seed

DEFAULT_DELTA_FLOOR = 1e-6
DEFAULT_SAMPLES = 1000
PROB_SUM_TOL = 1e-9
MIN_PAIR_DISTANCE = 1e-9


@dataclass(frozen=True)
class SpaceSpec:
    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")


@dataclass(frozen=True)
class VertexSet:
    id: str
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"vertex {self.id}: empty interval [{lo}, {hi}]")

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo <= c <= hi for c, (lo, hi) in zip(x, self.box))

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.box])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.box])


@dataclass(frozen=True)
class EdgeSpec:
    id: str
    source: str
    target: str
    map: tuple[Expr, ...]
    prob: Expr


@dataclass(frozen=True)
class MarkovSystem:
    """A finite Markov system ``(K_i(e), w_e, p_e)``; immutable once built.

    Edges keep their declaration order, which fixes the inverse-CDF order used
    when sampling and the depth-first order of every enumeration.
    """

    space: SpaceSpec
    vertices: tuple[VertexSet, ...]
    edges: tuple[EdgeSpec, ...]
    name: str = ""
    delta_floor: float = DEFAULT_DELTA_FLOOR
    samples: int = DEFAULT_SAMPLES
    # derived lookup tables and compiled evaluators
    vertex_pos: dict = field(init=False, repr=False, compare=False)
    edge_pos: dict = field(init=False, repr=False, compare=False)
    out_edges: tuple = field(init=False, repr=False, compare=False)
    edge_source: tuple = field(init=False, repr=False, compare=False)
    edge_target: tuple = field(init=False, repr=False, compare=False)
    prob_fn: tuple = field(init=False, repr=False, compare=False)
    map_fn: tuple = field(init=False, repr=False, compare=False)
    prob_vec: tuple = field(init=False, repr=False, compare=False)
    map_vec: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        setattr_ = object.__setattr__
        vpos = {v.id: i for i, v in enumerate(self.vertices)}
        if len(vpos) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        epos = {e.id: i for i, e in enumerate(self.edges)}
        if len(epos) != len(self.edges):
            raise ValueError("duplicate edge ids")
        for v in self.vertices:
            if len(v.box) != self.space.dim:
                raise ValueError(f"vertex {v.id}: box dimension differs from space")
        out = [[] for _ in self.vertices]
        for i, e in enumerate(self.edges):
            if e.source not in vpos or e.target not in vpos:
                raise ValueError(f"edge {e.id}: unknown vertex")
            if len(e.map) != self.space.dim:
                raise ValueError(f"edge {e.id}: map dimension differs from space")
            out[vpos[e.source]].append(i)
        setattr_(self, "vertex_pos", vpos)
        setattr_(self, "edge_pos", epos)
        setattr_(self, "out_edges", tuple(tuple(o) for o in out))
        setattr_(self, "edge_source", tuple(vpos[e.source] for e in self.edges))
        setattr_(self, "edge_target", tuple(vpos[e.target] for e in self.edges))
        setattr_(self, "prob_fn", tuple(compile_scalar(e.prob) for e in self.edges))
        setattr_(self, "map_fn", tuple(_compile_map(e.map) for e in self.edges))
        setattr_(self, "prob_vec", tuple(compile_vector(e.prob) for e in self.edges))
        setattr_(self, "map_vec", tuple(_compile_map_vec(e.map) for e in self.edges))

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "MarkovSystem":
        return cls(
            space=SpaceSpec(cfg.dim),
            vertices=tuple(VertexSet(v.id, v.box) for v in cfg.vertices),
            edges=tuple(EdgeSpec(e.id, e.source, e.target, e.map, e.prob) for e in cfg.edges),
            name=cfg.name,
            delta_floor=cfg.settings.get("delta_floor", DEFAULT_DELTA_FLOOR),
            samples=cfg.settings.get("samples", DEFAULT_SAMPLES),
        )

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def max_out_degree(self) -> int:
        return max((len(o) for o in self.out_edges), default=0)

    def edge_index(self, e) -> int:
        if isinstance(e, (int, np.integer)):
            return int(e)
        try:
            return self.edge_pos[e]
        except KeyError:
            raise KeyError(f"unknown edge {e!r}") from None

    def point(self, x) -> tuple[float, ...]:
        """Normalise ``x`` (a float in 1-D, else a sequence) to a coordinate tuple."""
        if isinstance(x, (int, float, np.floating, np.integer)):
            x = (float(x),)
        pt = tuple(float(c) for c in x)
        if len(pt) != self.dim:
            raise DomainError(f"point {pt} has {len(pt)} coordinates, space dim is {self.dim}")
        return pt

    def locate(self, x: tuple) -> int:
        """Index of the vertex whose box contains the tuple ``x``."""
        for i, v in enumerate(self.vertices):
            if v.contains(x):
                return i
        raise DomainError(f"point {x} lies in no vertex box")

    def locate_vec(self, X: np.ndarray) -> np.ndarray:
        """Vertex index per row of ``X``; -1 where a row lies in no box."""
        idx = np.full(X.shape[0], -1, dtype=np.intp)
        for i, v in enumerate(self.vertices):
            inside = np.all((X >= v.lo) & (X <= v.hi), axis=1) & (idx < 0)
            idx[inside] = i
        return idx

    def check_word(self, word) -> list[int]:
        idx = [self.edge_index(e) for e in word]
        if not idx:
            raise ChainError("empty word")
        for a, b in zip(idx, idx[1:]):
            if self.edge_target[a] != self.edge_source[b]:
                raise ChainError(f"edge {self.edges[b].id} does not start where "
                                 f"{self.edges[a].id} ends")
        return idx


def _compile_map(components):
    fns = [compile_scalar(c) for c in components]
    if len(fns) == 1:
        f0 = fns[0]
        return lambda x: (f0(x),)
    f0, f1 = fns
    return lambda x: (f0(x), f1(x))


def _compile_map_vec(components):
    fns = [compile_vector(c) for c in components]
    return lambda X: np.column_stack([f(X) for f in fns])


def parse_system(src: str) -> MarkovSystem:
    return MarkovSystem.from_config(parse_system_config(src))


def load_system(path) -> MarkovSystem:
    return parse_system(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# point-level operations

def vertex_of(sys: MarkovSystem, x) -> str:
    return sys.vertices[sys.locate(sys.point(x))].id


def _in_source(sys: MarkovSystem, i: int, x: tuple):
    v = sys.vertices[sys.edge_source[i]]
    if not v.contains(x):
        raise DomainError(f"point {x} is outside {v.id}, the source of edge {sys.edges[i].id}")


def eval_prob(sys: MarkovSystem, e, x) -> float:
    """``p_e(x)``; raises NumericError unless the value lies in [0, 1]."""
    i, x = sys.edge_index(e), sys.point(x)
    _in_source(sys, i, x)
    p = sys.prob_fn[i](x)
    if not 0.0 <= p <= 1.0:
        raise NumericError(f"probability of {sys.edges[i].id} at {x} is {p}, outside [0, 1]")
    return p


def apply_map(sys: MarkovSystem, e, x) -> tuple[float, ...]:
    i, x = sys.edge_index(e), sys.point(x)
    _in_source(sys, i, x)
    return sys.map_fn[i](x)


# --------------------------------------------------------------------------
# validation

def radical_inverse(i: int, base: int) -> float:
    f, r = 1.0, 0.0
    while i > 0:
        f /= base
        r += f * (i % base)
        i //= base
    return r


_BASES = (2, 3)


def sample_box(v: VertexSet, count: int) -> np.ndarray:
    """Box corners followed by ``count`` Halton points (van der Corput per coordinate)."""
    lo, hi = v.lo, v.hi
    d = len(v.box)
    corners = [[hi[j] if (k >> j) & 1 else lo[j] for j in range(d)] for k in range(1 << d)]
    inner = [[lo[j] + radical_inverse(i, _BASES[j]) * (hi[j] - lo[j]) for j in range(d)]
             for i in range(1, count + 1)]
    return np.array(corners + inner, dtype=float)


@dataclass(frozen=True)
class Violation:
    check: str
    ident: str
    point: tuple
    value: float


@dataclass
class ValidationReport:
    ok: bool
    min_prob: float
    max_prob_sum_error: float
    violations: list[Violation]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "min_prob": self.min_prob,
            "max_prob_sum_error": self.max_prob_sum_error,
            "violations": [
                {"check": v.check, "id": v.ident, "point": list(v.point), "value": v.value}
                for v in self.violations
            ],
        }


class _Worst:
    """Keeps the single worst offending sample per (check, id)."""

    def __init__(self):
        self.found: dict = {}

    def add(self, check, ident, point, value, badness):
        key = (check, ident)
        if key not in self.found or badness > self.found[key][0]:
            self.found[key] = (badness, Violation(check, ident, tuple(map(float, point)),
                                                  float(value)))

    def violations(self):
        return [v for _, v in self.found.values()]


def validate_system(sys: MarkovSystem, samples_per_vertex: int | None = None,
                    delta_floor: float | None = None) -> ValidationReport:
    """Check the model hypotheses on a deterministic sample of every vertex box.

    Checks box disjointness, out-degree, probability range and floor,
    normalisation to within 1e-9, and that every map sends its source box into
    its target box. Failures are reported, never raised; each (check, id) pair
    lists its worst sample only.
    """
    count = sys.samples if samples_per_vertex is None else samples_per_vertex
    if count < 1:
        raise ValueError("samples_per_vertex must be >= 1")
    floor = sys.delta_floor if delta_floor is None else delta_floor
    bad = _Worst()
    min_prob, max_err = math.inf, 0.0

    for a in range(len(sys.vertices)):
        for b in range(a + 1, len(sys.vertices)):
            va, vb = sys.vertices[a], sys.vertices[b]
            lo = np.maximum(va.lo, vb.lo)
            hi = np.minimum(va.hi, vb.hi)
            if np.all(lo <= hi):
                bad.add("box-overlap", f"{va.id}/{vb.id}", lo, float(np.prod(hi - lo)), 0.0)

    for vi, v in enumerate(sys.vertices):
        edges = sys.out_edges[vi]
        if not edges:
            bad.add("no-outgoing", v.id, v.lo, 0.0, 0.0)
            continue
        X = sample_box(v, count)
        total = np.zeros(len(X))
        for i in edges:
            e = sys.edges[i]
            try:
                p = sys.prob_vec[i](X)
            except NumericError:
                for x in X:
                    try:
                        sys.prob_fn[i](tuple(x))
                    except NumericError:
                        bad.add("prob-eval", e.id, x, math.nan, 0.0)
                        break
                total[:] = math.nan
                continue
            total += p
            min_prob = min(min_prob, float(p.min()))
            k = int(np.argmin(p))
            if p[k] < floor:
                bad.add("prob-floor", e.id, X[k], p[k], floor - p[k])
            k = int(np.argmax(p))
            if p[k] > 1.0:
                bad.add("prob-range", e.id, X[k], p[k], p[k] - 1.0)
            try:
                Y = sys.map_vec[i](X)
            except NumericError:
                bad.add("map-eval", e.id, X[0], math.nan, 0.0)
                continue
            tgt = sys.vertices[sys.edge_target[i]]
            outside = ~np.all((Y >= tgt.lo) & (Y <= tgt.hi), axis=1)
            if outside.any():
                dist = np.max(np.maximum(tgt.lo - Y, Y - tgt.hi), axis=1)
                k = int(np.argmax(np.where(outside, dist, -np.inf)))
                bad.add("map-containment", e.id, X[k], float(dist[k]), float(dist[k]))
        if np.all(np.isfinite(total)):
            err = np.abs(total - 1.0)
            max_err = max(max_err, float(err.max()))
            k = int(np.argmax(err))
            if err[k] > PROB_SUM_TOL:
                bad.add("prob-sum", v.id, X[k], total[k], err[k])

    violations = bad.violations()
    return ValidationReport(not violations, min_prob if min_prob < math.inf else math.nan,
                            max_err, violations)


# --------------------------------------------------------------------------
# contraction coefficient

@dataclass(frozen=True)
class ContractionEstimate:
    a_hat: float
    worst_pair: tuple
    pairs_tested: int

    @property
    def contractive(self) -> bool:
        return self.a_hat < 1.0


def contraction_estimate(sys: MarkovSystem, pairs: int, seed=0) -> ContractionEstimate:
    """Largest sampled ratio ``sum_e p_e(x) d(w_e x, w_e y) / d(x, y)``.

    Pairs ``(x, y)`` are drawn uniformly from a common vertex box; pairs closer
    than 1e-9 are redrawn. This is a lower bound for the true coefficient.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    rng = CounterRNG(as_seed(seed))
    live = [i for i, o in enumerate(sys.out_edges) if o]
    a_hat, worst = -1.0, None
    for _ in range(pairs):
        vi = live[min(int(rng.uniform() * len(live)), len(live) - 1)]
        v = sys.vertices[vi]
        while True:
            x = tuple(lo + rng.uniform() * (hi - lo) for lo, hi in v.box)
            y = tuple(lo + rng.uniform() * (hi - lo) for lo, hi in v.box)
            dxy = math.dist(x, y)
            if dxy >= MIN_PAIR_DISTANCE:
                break
        ratio = 0.0
        for i in sys.out_edges[vi]:
            ratio += sys.prob_fn[i](x) * math.dist(sys.map_fn[i](x), sys.map_fn[i](y))
        ratio /= dxy
        if ratio > a_hat:
            a_hat, worst = ratio, (x, y, v.id)
    return ContractionEstimate(a_hat, worst, pairs)


def describe(sys: MarkovSystem) -> str:
    lines = [f"system {sys.name!r} dim={sys.dim}"]
    for v in sys.vertices:
        lines.append(f"  vertex {v.id} box={list(v.box)}")
    for e in sys.edges:
        maps = ", ".join(to_source(m) for m in e.map)
        lines.append(f"  edge {e.id}: {e.source}->{e.target} map=({maps}) prob={to_source(e.prob)}")
    return "\n".join(lines)


__all__ = [
    "SpaceSpec", "VertexSet", "EdgeSpec", "MarkovSystem", "ValidationReport", "Violation",
    "ContractionEstimate", "vertex_of", "eval_prob", "apply_map", "validate_system",
    "contraction_estimate", "load_system", "parse_system", "sample_box",
]
