"""Pathwise limits and their integral counterparts.

Along a path from ``x`` the averages ``(1/n) sum_k f_{sigma_{k+1}}(X_k)``
should approach ``sum_e int p_e f_e dmu`` for almost every path when the
invariant measure is unique. With ``f_e = log p_e`` the left side is the
normalised path log-probability, so the same check compares the pathwise
entropy rate with ``-sum_e int p_e log p_e dmu``. The cylinder measure
``M([e_1..e_k]) = int P_x([e_1..e_k]) dmu(x)`` is probed for shift invariance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SizeError
from .measures import (DEFAULT_BURN_IN, EmpiricalMeasure, UlamDensity, estimate_invariant,
                       family_density, integrate, ulam_invariant)
from .operator import ObservableFamily
from .rng import as_seed
from .sampler import LEAF_CAP, running_sum, sample_path
from .system import MarkovSystem, contraction_estimate

DEFAULT_BINS = 4096
PASS_FRACTION = 0.95


def default_tolerance(n: int) -> float:
    return max(2e-2, 4.0 / math.sqrt(n))


def dyadic_grid(n: int) -> np.ndarray:
    grid, k = [], 1
    while k < n:
        grid.append(k)
        k *= 2
    grid.append(n)
    return np.array(grid)


@dataclass
class BirkhoffSeries:
    grid: np.ndarray  # n values on the dyadic grid
    values: np.ndarray  # S_n / n at the grid points
    averages: np.ndarray  # S_n / n for every n = 1..N

    @property
    def final(self) -> float:
        return float(self.averages[-1])


def birkhoff_series(sys: MarkovSystem, x, fam: ObservableFamily, n: int, seed=0) -> BirkhoffSeries:
    """Running averages of ``f_{sigma_{k+1}}(X_k)`` along one sampled path."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = sample_path(sys, x, n, seed)
    f = fam.scalar
    states = traj.states.tolist()
    edges = traj.edges.tolist()
    sums = running_sum(f[edges[k]](tuple(states[k])) for k in range(n))
    avgs = np.array(sums[1:]) / np.arange(1, n + 1)
    grid = dyadic_grid(n)
    return BirkhoffSeries(grid, avgs[grid - 1], avgs)


def rhs_functional(sys: MarkovSystem, fam: ObservableFamily, mu) -> float:
    """``sum_e int_{K_i(e)} p_e f_e dmu``."""
    return integrate(mu, fam, sys)


def entropy_pathwise(sys: MarkovSystem, x, n: int, seed=0) -> np.ndarray:
    """``-(1/k) log P_x([sigma_1..sigma_k])`` for ``k = 1..n`` along one sampled path."""
    if n < 1:
        raise ValueError("n must be >= 1")
    traj = sample_path(sys, x, n, seed)
    return -traj.logprob_cum[1:] / np.arange(1, n + 1)


def entropy_integral(sys: MarkovSystem, mu) -> float:
    """``-sum_e int p_e log p_e dmu``, with ``0 log 0 = 0``."""
    return -integrate(mu, ObservableFamily.log_p(sys), sys)


def batch_standard_error(values: np.ndarray, batches: int = 32) -> float:
    """Standard error of the mean of a correlated series by non-overlapping batch means."""
    m = values.size // batches
    if m < 2:
        return float(np.std(values, ddof=1) / math.sqrt(max(values.size, 1))) if values.size > 1 else 0.0
    means = values[: m * batches].reshape(batches, m).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(batches))


def applicability(sys: MarkovSystem, pairs: int = 2000, seed=0) -> dict:
    """Which standing hypotheses hold numerically for this system."""
    est = contraction_estimate(sys, pairs, seed)
    return {
        "compact_state_space": True,
        "contraction_a_hat": est.a_hat,
        "contractive": est.contractive,
        "note": "limits assume a unique invariant measure; the state space is a finite "
                "union of closed boxes, so it is compact",
    }


# --------------------------------------------------------------------------
# reports

@dataclass
class Oracles:
    empirical: float | None = None
    ulam: float | None = None
    empirical_se: float = 0.0

    @property
    def value(self) -> float:
        return self.ulam if self.ulam is not None else self.empirical

    @property
    def uncertainty(self) -> float:
        u = self.empirical_se
        if self.ulam is not None and self.empirical is not None:
            u = max(u, abs(self.ulam - self.empirical))
        return u


def _oracles(sys: MarkovSystem, fam_or_none, x, n_mu: int, seed, bins: int | None,
             mu_empirical=None, mu_ulam=None, negate=False) -> Oracles:
    fam = fam_or_none or ObservableFamily.log_p(sys)
    sign = -1.0 if negate else 1.0
    if mu_empirical is None:
        mu_empirical = estimate_invariant(sys, x, n_mu + DEFAULT_BURN_IN, DEFAULT_BURN_IN, seed)
    X, w = mu_empirical.support()
    dens = family_density(sys, fam, X, sys.locate_vec(X))
    emp = sign * float(np.dot(w, dens))
    se = batch_standard_error(dens) if mu_empirical.weights is None else 0.0
    ul = None
    if mu_ulam is None and bins and sys.dim == 1:
        mu_ulam = ulam_invariant(sys, bins)
    if mu_ulam is not None:
        ul = sign * rhs_functional(sys, fam, mu_ulam)
    return Oracles(emp, ul, se)


@dataclass
class ErgodicReport:
    quantity: str
    grid: np.ndarray
    lhs_series: np.ndarray  # (replicas, len(grid))
    finals: np.ndarray
    rhs: float
    rhs_uncertainty: float
    rhs_empirical: float | None
    rhs_ulam: float | None
    final_gaps: np.ndarray
    tol: float
    n: int
    seed: tuple
    header: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return len(self.finals)

    @property
    def n_pass(self) -> int:
        return int(np.sum(self.final_gaps <= self.tol))

    @property
    def final_gap(self) -> float:
        return float(np.max(self.final_gaps))

    @property
    def passed(self) -> bool:
        return self.n_pass >= math.ceil(PASS_FRACTION * self.replicas)

    def summary(self) -> dict:
        return {
            "quantity": self.quantity,
            "n": self.n,
            "replicas": self.replicas,
            "lhs_final": [float(v) for v in self.finals],
            "lhs_mean": float(np.mean(self.finals)),
            "lhs_spread": float(np.ptp(self.finals)),
            "rhs": self.rhs,
            "rhs_uncertainty": self.rhs_uncertainty,
            "rhs_empirical": self.rhs_empirical,
            "rhs_ulam": self.rhs_ulam,
            "final_gap": self.final_gap,
            "tol": self.tol,
            "n_pass": self.n_pass,
            "pass": self.passed,
            "applicability": self.header,
        }

    def series_csv(self) -> str:
        rows = ["n,value,replica"]
        for r, series in enumerate(self.lhs_series):
            rows += [f"{int(k)},{'%.17g' % v},{r}" for k, v in zip(self.grid, series)]
        return "\n".join(rows) + "\n"


def birkhoff_report(sys: MarkovSystem, x, fam: ObservableFamily, n: int, replicas: int,
                    seed=0, tol: float | None = None, bins: int | None = DEFAULT_BINS,
                    mu_n: int | None = None, mu=None) -> ErgodicReport:
    """Birkhoff averages over independent replicas against ``sum_e int p_e f_e dmu``.

    Replica ``r`` uses stream ``(seed.master, r)``. The right side uses the
    Ulam density when available (1-D) and a separate empirical measure
    otherwise; both values are reported. The run passes when at least 95% of
    replicas end within ``tol`` of the right side.
    """
    if replicas < 3:
        raise ValueError("replicas must be >= 3")
    seed = as_seed(seed)
    tol = default_tolerance(n) if tol is None else tol
    series = [birkhoff_series(sys, x, fam, n, seed.with_replica(r)) for r in range(replicas)]
    if mu is not None:
        rhs = rhs_functional(sys, fam, mu)
        orc = Oracles(rhs if isinstance(mu, EmpiricalMeasure) else None,
                      rhs if isinstance(mu, UlamDensity) else None)
    else:
        orc = _oracles(sys, fam, x, mu_n or n, seed.child(1), bins)
    finals = np.array([s.final for s in series])
    return ErgodicReport(
        quantity=f"birkhoff[{fam.name}]",
        grid=series[0].grid,
        lhs_series=np.array([s.values for s in series]),
        finals=finals,
        rhs=orc.value,
        rhs_uncertainty=orc.uncertainty,
        rhs_empirical=orc.empirical,
        rhs_ulam=orc.ulam,
        final_gaps=np.abs(finals - orc.value),
        tol=tol,
        n=n,
        seed=(seed.master, seed.replica),
        header=applicability(sys, seed=seed.child(2)),
    )


def entropy_report(sys: MarkovSystem, x, n: int, replicas: int = 1, seed=0,
                   tol: float | None = None, bins: int | None = DEFAULT_BINS,
                   mu_n: int | None = None, mu=None) -> ErgodicReport:
    """Pathwise entropy rate over replicas against ``-sum_e int p_e log p_e dmu``."""
    seed = as_seed(seed)
    tol = default_tolerance(n) if tol is None else tol
    grid = dyadic_grid(n)
    runs = [entropy_pathwise(sys, x, n, seed.with_replica(r)) for r in range(replicas)]
    if mu is not None:
        h = entropy_integral(sys, mu)
        orc = Oracles(h if isinstance(mu, EmpiricalMeasure) else None,
                      h if isinstance(mu, UlamDensity) else None)
    else:
        orc = _oracles(sys, None, x, mu_n or n, seed.child(1), bins, negate=True)
    finals = np.array([r[-1] for r in runs])
    return ErgodicReport(
        quantity="entropy",
        grid=grid,
        lhs_series=np.array([r[grid - 1] for r in runs]),
        finals=finals,
        rhs=orc.value,
        rhs_uncertainty=orc.uncertainty,
        rhs_empirical=orc.empirical,
        rhs_ulam=orc.ulam,
        final_gaps=np.abs(finals - orc.value),
        tol=tol,
        n=n,
        seed=(seed.master, seed.replica),
        header=applicability(sys, seed=seed.child(2)),
    )


# --------------------------------------------------------------------------
# cylinder measure

def cylinder_M(sys: MarkovSystem, word, mu) -> float:
    """``int P_x([e_1..e_k]) dmu(x)`` over support points in the source box of ``e_1``."""
    idx = sys.check_word(word)
    X, w = mu.support()
    V = sys.locate_vec(X)
    rows = np.flatnonzero(V == sys.edge_source[idx[0]])
    if rows.size == 0:
        return 0.0
    X = X[rows]
    lp = np.zeros(rows.size)
    with np.errstate(divide="ignore"):
        for i in idx:
            lp += np.log(sys.prob_vec[i](X))
            X = sys.map_vec[i](X)
    return float(np.dot(w[rows], np.exp(lp)))


def chainable_words(sys: MarkovSystem, length: int) -> list[tuple[int, ...]]:
    words = [(i,) for i in range(len(sys.edges))]
    for _ in range(length - 1):
        words = [w + (j,) for w in words for j in sys.out_edges[sys.edge_target[w[-1]]]]
    return words


def stationarity_residuals(sys: MarkovSystem, words_up_to: int, mu) -> tuple[float, float]:
    """Worst one-step shift residual and worst extension residual over short words.

    Shift: ``|sum_{e into start(w)} M([e w]) - M([w])|``, zero for every ``w``
    exactly when ``mu`` is invariant. Extension: ``|sum_{e out of end(w)}
    M([w e]) - M([w])|``, zero for any normalised ``mu``.
    """
    if words_up_to < 1:
        raise ValueError("words_up_to must be >= 1")
    if words_up_to * sys.max_out_degree ** words_up_to > LEAF_CAP:
        raise SizeError(f"words up to length {words_up_to} exceed the cap of {LEAF_CAP}")
    cache: dict = {}

    def M(w):
        if w not in cache:
            cache[w] = cylinder_M(sys, w, mu)
        return cache[w]

    into = [[i for i in range(len(sys.edges)) if sys.edge_target[i] == v]
            for v in range(len(sys.vertices))]
    shift = ext = 0.0
    for length in range(1, words_up_to + 1):
        for w in chainable_words(sys, length):
            m = M(w)
            lhs = math.fsum(M((e,) + w) for e in into[sys.edge_source[w[0]]])
            shift = max(shift, abs(lhs - m))
            rhs = math.fsum(M(w + (e,)) for e in sys.out_edges[sys.edge_target[w[-1]]])
            ext = max(ext, abs(rhs - m))
    return shift, ext


def stationarity_residual(sys: MarkovSystem, words_up_to: int, mu) -> float:
    return max(stationarity_residuals(sys, words_up_to, mu))


def cylinder_table(sys: MarkovSystem, words_up_to: int, mu) -> list[tuple[str, float]]:
    ids = [e.id for e in sys.edges]
    out = []
    for length in range(1, words_up_to + 1):
        for w in chainable_words(sys, length):
            out.append((" ".join(ids[i] for i in w), cylinder_M(sys, w, mu)))
    return out
