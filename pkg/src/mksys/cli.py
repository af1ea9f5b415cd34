"""``mksys`` command line: validate, simulate and verify Markov systems.

Exit codes: 0 success/pass, 1 domain error or failed criterion, 2 usage or
parse error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigReferenceError, MksysError, ParseError
from .ergodic import (DEFAULT_BINS, cylinder_table, default_tolerance, entropy_report,
                      stationarity_residuals, birkhoff_report)
from .measures import (DEFAULT_BURN_IN, estimate_invariant, finite_orbit_invariant, integrate,
                       invariance_residual, ulam_invariant)
from .operator import SUM_BLOCK, Observable, ObservableFamily
from .rng import RngSeed
from .sampler import sample_path
from .system import contraction_estimate, parse_system, validate_system

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    s = "%.17g" % v
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 0) -> str:
    """JSON with sorted keys and 17-significant-digit floats."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{dumps(str(k))}: {dumps(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(dumps(v, indent + 1) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class UsageError(Exception):
    pass


def _parse_point(text: str | None, system):
    if text is None:
        v = system.vertices[0]
        return tuple(0.5 * (lo + hi) for lo, hi in v.box)
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"bad --x0 {text!r}; expected comma-separated numbers") from None


def _load(path: str):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise UsageError(f"{path} is not UTF-8 text") from None
    return parse_system(text), raw


def _family(spec: str, system) -> ObservableFamily:
    try:
        return _family_from(spec, system)
    except KeyError as exc:
        raise UsageError(f"bad family {spec!r}: {exc.args[0]}") from None


def _family_from(spec: str, system) -> ObservableFamily:
    if spec in ("logp", "log_p"):
        return ObservableFamily.log_p(system)
    if spec in ("occupancy", "occupation"):
        return ObservableFamily.occupancy(system)
    if spec.startswith("occupancy:"):
        return ObservableFamily.occupancy(system, spec.split(":", 1)[1])
    if spec.startswith("edge:"):
        return ObservableFamily.edge_frequency(system, spec.split(":", 1)[1])
    if spec.startswith("const:"):
        return ObservableFamily.constant(system, float(spec.split(":", 1)[1]))
    path = Path(spec)
    if path.is_file():
        return ObservableFamily.parse(system, path.read_text(encoding="utf-8"), spec)
    raise UsageError(f"unknown family {spec!r}")


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return int(os.environ.get("MKSYS_THREADS", "1"))


def manifest(args, raw: bytes, params: dict) -> dict:
    return {
        "command": args.command,
        "config": args.config,
        "config_fnv1a64": "%016x" % fnv1a64(raw),
        "seed": getattr(args, "seed", None),
        "parameters": params,
        "version": __version__,
        "thread_block_size": SUM_BLOCK,
        "threads": _threads(args),
    }


def _emit(args, raw, params, summary, series: str | None, extra: dict | None = None):
    print(dumps(summary))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(dumps(summary) + "\n")
        (out / "manifest.json").write_text(dumps(manifest(args, raw, params)) + "\n")
        if series is not None:
            (out / "series.csv").write_text(series)
        for name, text in (extra or {}).items():
            (out / name).write_text(text)


# --------------------------------------------------------------------------
# commands

def cmd_validate(args) -> int:
    system, _ = _load(args.config)
    report = validate_system(system, args.samples)
    print(dumps(report.to_dict()))
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    system, raw = _load(args.config)
    x0 = _parse_point(args.x0, system)
    traj = sample_path(system, x0, args.n, RngSeed(args.seed))
    csv = traj.to_csv()
    params = {"x0": list(x0), "n": args.n}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trajectory.csv").write_text(csv)
        (out / "manifest.json").write_text(dumps(manifest(args, raw, params)) + "\n")
    else:
        _sys.stdout.write(csv)
    return EXIT_OK


def cmd_birkhoff(args) -> int:
    system, raw = _load(args.config)
    x0 = _parse_point(args.x0, system)
    fam = _family(args.fam, system)
    rep = birkhoff_report(system, x0, fam, args.n, args.replicas, RngSeed(args.seed), args.tol,
                          bins=args.bins if system.dim == 1 else None)
    params = {"x0": list(x0), "n": args.n, "replicas": args.replicas, "fam": args.fam,
              "bins": args.bins, "tol": rep.tol}
    _emit(args, raw, params, rep.summary(), rep.series_csv())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_entropy(args) -> int:
    system, raw = _load(args.config)
    x0 = _parse_point(args.x0, system)
    rep = entropy_report(system, x0, args.n, args.replicas, RngSeed(args.seed), args.tol,
                         bins=args.bins if system.dim == 1 else None)
    summary = rep.summary()
    summary["entropy_pathwise"] = float(np.mean(rep.finals))
    summary["entropy_integral"] = rep.rhs
    params = {"x0": list(x0), "n": args.n, "replicas": args.replicas, "bins": args.bins,
              "tol": rep.tol}
    _emit(args, raw, params, summary, rep.series_csv())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _test_observables(dim: int) -> list[str]:
    if dim == 1:
        return ["x", "x*x", "exp(x)"]
    return ["x[0]", "x[1]", "x[0]*x[1]", "exp(x[0])"]


def cmd_invariant(args) -> int:
    system, raw = _load(args.config)
    x0 = _parse_point(args.x0, system)
    mu = estimate_invariant(system, x0, args.n, args.burn_in, RngSeed(args.seed))
    tol = args.tol if args.tol is not None else max(5e-3, 4.0 / math.sqrt(args.n))
    gs = _test_observables(system.dim)
    resid = invariance_residual(system, mu, gs)
    summary = {
        "support_points": int(mu.points.shape[0]),
        "empirical_mean": [integrate(mu, Observable.coordinate(j)) for j in range(system.dim)],
        "invariance_residual": resid,
        "test_observables": gs,
        "tol": tol,
    }
    series, extra = None, {}
    if system.dim == 1:
        ul = ulam_invariant(system, args.bins)
        summary.update({
            "ulam_bins": ul.bins,
            "ulam_mean": [integrate(ul, Observable.coordinate(0))],
            "ulam_residual": ul.residual,
            "ulam_invariance_residual": invariance_residual(system, ul, gs),
        })
        series = ul.to_csv()
    if args.support:
        extra["support.csv"] = mu.to_csv()
    summary["pass"] = resid <= tol
    params = {"x0": list(x0), "n": args.n, "burn_in": args.burn_in, "bins": args.bins, "tol": tol}
    _emit(args, raw, params, summary, series, extra)
    return EXIT_OK if summary["pass"] else EXIT_FAIL


def cmd_contract(args) -> int:
    system, raw = _load(args.config)
    est = contraction_estimate(system, args.pairs, RngSeed(args.seed))
    x, y, vid = est.worst_pair
    summary = {"a_hat": est.a_hat, "contractive": est.contractive, "pairs": est.pairs_tested,
               "worst_pair": {"x": list(x), "y": list(y), "vertex": vid}, "pass": est.contractive}
    _emit(args, raw, {"pairs": args.pairs}, summary, None)
    return EXIT_OK if est.contractive else EXIT_FAIL


def cmd_mmeasure(args) -> int:
    system, raw = _load(args.config)
    x0 = _parse_point(args.x0, system)
    kind = args.mu
    if kind == "auto":
        kind = "ulam" if system.dim == 1 else "empirical"
    if kind == "ulam":
        mu = ulam_invariant(system, args.bins)
    elif kind == "orbit":
        mu = finite_orbit_invariant(system, x0)
    else:
        mu = estimate_invariant(system, x0, args.n, DEFAULT_BURN_IN, RngSeed(args.seed))
    shift, ext = stationarity_residuals(system, args.words, mu)
    tol = args.tol if args.tol is not None else 5e-3
    table = cylinder_table(system, args.words, mu)
    series = "word,M\n" + "".join(f"{w},{'%.17g' % m}\n" for w, m in table)
    summary = {"mu": kind, "words_up_to": args.words, "shift_residual": shift,
               "extension_residual": ext, "stationarity_residual": max(shift, ext),
               "tol": tol, "pass": max(shift, ext) <= tol}
    params = {"x0": list(x0), "mu": kind, "n": args.n, "bins": args.bins, "words": args.words,
              "tol": tol}
    _emit(args, raw, params, summary, series)
    return EXIT_OK if summary["pass"] else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mksys", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"mksys {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(name, help_, seed=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="system configuration file (.mks)")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker cap recorded in the manifest (default $MKSYS_THREADS or 1)")
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        return sp

    sp = common("validate", "check the model hypotheses on a sample grid", seed=False)
    sp.add_argument("--samples", type=int, default=None,
                    help="samples per vertex (default: config setting or 1000)")
    sp.set_defaults(func=cmd_validate)

    sp = common("simulate", "sample one trajectory as CSV")
    sp.add_argument("--x0", help="start point, comma-separated (default: centre of first vertex)")
    sp.add_argument("--n", type=int, default=1000, help="number of steps (default 1000)")
    sp.add_argument("--out", help="output directory (default: CSV to stdout)")
    sp.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("birkhoff", cmd_birkhoff, "pathwise averages vs integral"),
                              ("entropy", cmd_entropy, "pathwise entropy rate vs integral")):
        sp = common(name, help_)
        sp.add_argument("--x0")
        sp.add_argument("--n", type=int, default=100_000, help="path length (default 1e5)")
        sp.add_argument("--replicas", type=int, default=8 if name == "birkhoff" else 1)
        sp.add_argument("--bins", type=int, default=DEFAULT_BINS,
                        help="Ulam bins for the reference integral (1-D; default 4096)")
        sp.add_argument("--tol", type=float, default=None,
                        help="pass tolerance (default max(0.02, 4/sqrt(n)))")
        sp.add_argument("--out")
        if name == "birkhoff":
            sp.add_argument("--fam", default="occupancy",
                            help="logp | occupancy[:V] | edge:ID | const:C | family file "
                                 "(default occupancy)")
        sp.set_defaults(func=func)

    sp = common("invariant", "empirical and Ulam invariant measure estimates")
    sp.add_argument("--x0")
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--burn-in", type=int, default=DEFAULT_BURN_IN)
    sp.add_argument("--bins", type=int, default=DEFAULT_BINS)
    sp.add_argument("--tol", type=float, default=None,
                    help="invariance residual tolerance (default max(5e-3, 4/sqrt(n)))")
    sp.add_argument("--support", action="store_true", help="also write support.csv")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_invariant)

    sp = common("contract", "sampled contraction coefficient")
    sp.add_argument("--pairs", type=int, default=10_000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_contract)

    sp = common("mmeasure", "cylinder measure and its stationarity residuals")
    sp.add_argument("--x0")
    sp.add_argument("--mu", choices=("auto", "ulam", "empirical", "orbit"), default="auto")
    sp.add_argument("--n", type=int, default=100_000)
    sp.add_argument("--bins", type=int, default=DEFAULT_BINS)
    sp.add_argument("--words", type=int, default=3, help="longest word length (default 3)")
    sp.add_argument("--tol", type=float, default=None, help="residual tolerance (default 5e-3)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_mmeasure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, ConfigReferenceError) as exc:
        print(f"mksys: error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (MksysError, ValueError, KeyError) as exc:
        print(f"mksys: {type(exc).__name__}: {exc}", file=_sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
