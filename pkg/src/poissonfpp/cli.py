"""Command-line front end: ``poissonfpp {sample, geodesic, animal, experiment}``.

Every subcommand needs ``--seed``.  Settings come from an optional JSON
``--config`` file, then command-line flags override them.  Exit codes: 0 on
success, 1 for usage or configuration errors, 2 when an experiment breaks a
hard invariant.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import _jsonio
from .action import ActionParams
from .animals import AnimalGrid, greedy_animal_exact, greedy_animal_heuristic, grid_from_records, grid_to_records
from .environment import Window, config_to_dict, derive_seed, load_config, sample_poisson, save_config
from .errors import BadTarget, FPPError, MissingSeed, SpecError, TooManyCandidates
from .experiments import ExperimentSpec, default_workers, run_experiment
from .geometry import Line, Point2, Segment, SinglePoint, closest_point
from .solver import GeodesicProblem, Mode, SolverOptions, solve

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2

_SAMPLE_KEYS = {"window", "intensity"}
_GEODESIC_KEYS = {"environment", "start", "target", "c", "t", "s", "solver"}
_ANIMAL_KEYS = {"grid", "n", "method", "sample", "restarts"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="poissonfpp", description="Poisson-point action minimizers and scaling experiments.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON settings file")
        sp.add_argument("--seed", type=int, help="master seed (required)")
        sp.add_argument("--out", help="output file or directory")
        sp.add_argument("--workers", type=int, help="worker processes (default: FPP_WORKERS or 1)")

    sp = sub.add_parser("sample", help="sample a Poisson configuration")
    common(sp)
    sp.add_argument("--window", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    sp.add_argument("--intensity", type=float)

    sp = sub.add_parser("geodesic", help="solve one action-minimization problem")
    common(sp)
    sp.add_argument("--env", help="environment JSON written by 'sample'")
    sp.add_argument("--window", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    sp.add_argument("--intensity", type=float)
    sp.add_argument("--start", type=float, nargs=2, metavar=("X", "Y"))
    sp.add_argument("--line", type=float, metavar="T", help="target: vertical line x = T")
    sp.add_argument("--point", type=float, nargs=2, metavar=("X", "Y"), help="target: a single point")
    sp.add_argument("--segment", type=float, nargs=4, metavar=("AX", "AY", "BX", "BY"), help="target: a segment")
    sp.add_argument("--c", type=float)
    sp.add_argument("--t", type=float, help="time budget is s = c t (t defaults to the distance to the target)")
    sp.add_argument("--s", type=float, help="time budget, overriding c and t")
    sp.add_argument("--exact", action="store_true", help="force the exact solver")
    sp.add_argument("--heuristic", action="store_true", help="force the heuristic solver")

    sp = sub.add_parser("animal", help="greedy lattice animal of a grid")
    common(sp)
    sp.add_argument("--grid", help="JSON array of {i, j, value}")
    sp.add_argument("--n", type=int)
    sp.add_argument("--lam", type=float, help="sample an i.i.d. Poisson(lam) grid instead of reading one")
    sp.add_argument("--heuristic", action="store_true")
    sp.add_argument("--restarts", type=int)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    common(sp)
    sp.add_argument("--kind", choices=["Moments", "Xi", "VarianceDiff", "Locality", "AnimalTail"])
    sp.add_argument("--c", type=float)
    sp.add_argument("--t", help="comma-separated t grid, e.g. 8,16,32,64")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--gamma-prime", type=float, dest="gamma_prime")
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--intensity", type=float)
    sp.add_argument("--exact", action="store_true", help="force the exact solver")
    sp.add_argument("--k", type=int, help="odd box side K")
    sp.add_argument("--no-figures", action="store_true", dest="no_figures")
    return p


# ---------------------------------------------------------------- helpers


def _load(path) -> dict:
    if not path:
        return {}
    try:
        doc = _jsonio.read_json(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    return doc


def _reject_unknown(doc: dict, allowed: set, where: str):
    bad = sorted(set(doc) - allowed)
    if bad:
        raise SpecError([f"unknown field {where}.{b!r}" for b in bad])


def _seed(args) -> int:
    if args.seed is None:
        raise MissingSeed("--seed is required; runs are never seeded implicitly")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must lie in [0, 2^64)")
    return int(args.seed)


def _window(vals) -> Window:
    if isinstance(vals, dict):
        return Window(float(vals["xmin"]), float(vals["xmax"]), float(vals["ymin"]), float(vals["ymax"]))
    return Window(*map(float, vals))


def _target(doc) -> object:
    """Target from ``{"type": "line"|"segment"|"point", ...}``."""
    if not isinstance(doc, dict) or "type" not in doc:
        raise BadTarget("target must be an object with a 'type'")
    kind = doc["type"]
    try:
        if kind == "line":
            if "t" in doc:
                return Line(Point2(float(doc["t"]), 0.0), Point2(0.0, 1.0))
            return Line(Point2(*doc["origin"]), Point2(*doc["direction"]))
        if kind == "segment":
            return Segment(Point2(*doc["a"]), Point2(*doc["b"]))
        if kind == "point":
            return SinglePoint(Point2(*doc["p"]))
    except (KeyError, TypeError) as exc:
        raise BadTarget(f"malformed {kind} target: {exc}") from None
    raise BadTarget(f"unknown target type {kind!r}")


def _write_json(path, doc):
    if path:
        d = os.path.dirname(path)
        if d:
            os.makedirs(d, exist_ok=True)
        _jsonio.write_json(path, doc)
    else:
        sys.stdout.write(_jsonio.dumps(doc) + "\n")


# ---------------------------------------------------------------- commands


def cmd_sample(args) -> int:
    seed = _seed(args)
    doc = _load(args.config)
    _reject_unknown(doc, _SAMPLE_KEYS, "config")
    win = args.window if args.window is not None else doc.get("window")
    if win is None:
        raise UsageError("sample needs a window (--window or config 'window')")
    intensity = args.intensity if args.intensity is not None else float(doc.get("intensity", 1.0))
    cfg = sample_poisson(_window(win), intensity, seed)
    if args.out:
        save_config(args.out, cfg)
    else:
        _write_json(None, config_to_dict(cfg))
    return EXIT_OK


def cmd_geodesic(args) -> int:
    seed = _seed(args)
    doc = _load(args.config)
    _reject_unknown(doc, _GEODESIC_KEYS, "config")

    if args.line is not None:
        target = Line(Point2(args.line, 0.0), Point2(0.0, 1.0))
    elif args.point is not None:
        target = SinglePoint(Point2(*args.point))
    elif args.segment is not None:
        target = Segment(Point2(*args.segment[:2]), Point2(*args.segment[2:]))
    elif "target" in doc:
        target = _target(doc["target"])
    else:
        raise UsageError("geodesic needs a target (--line, --point, --segment or config 'target')")

    env = doc.get("environment")
    if args.env:
        cfg = load_config(args.env)
    elif args.window is not None or isinstance(env, dict):
        win = args.window if args.window is not None else env["window"]
        intensity = args.intensity if args.intensity is not None else float((env or {}).get("intensity", 1.0))
        cfg = sample_poisson(_window(win), intensity, derive_seed(seed, 0))
    elif isinstance(env, str):
        cfg = load_config(env)
    else:
        raise UsageError("geodesic needs an environment (--env, --window or config 'environment')")

    start = Point2(*(args.start if args.start is not None else doc.get("start", (0.0, 0.0))))
    if args.s is not None:
        s = args.s
    elif "s" in doc and args.c is None:
        s = float(doc["s"])
    else:
        c = args.c if args.c is not None else doc.get("c")
        t = args.t if args.t is not None else doc.get("t")
        if t is None:
            t = closest_point(target, start)[1]
        if c is None or t is None:
            raise UsageError("geodesic needs a time budget: --s, or --c (t defaults to the distance to the target)")
        s = float(c) * float(t)
    params = ActionParams(float(s))

    sopts = dict(doc.get("solver", {}))
    if args.exact and args.heuristic:
        raise UsageError("--exact and --heuristic are mutually exclusive")
    if args.exact:
        sopts["force_mode"] = Mode.EXACT
    if args.heuristic:
        sopts["force_mode"] = Mode.HEURISTIC
    sopts.setdefault("heuristic_seed", derive_seed(seed, 1))
    try:
        options = SolverOptions(**sopts)
    except TypeError as exc:
        raise SpecError([f"solver: {exc}"]) from None
    sol = solve(GeodesicProblem(cfg, start, target, params, options))
    verts = np.vstack(([tuple(start)], cfg.points[list(sol.path.interior)] if sol.path.interior else np.empty((0, 2)), [tuple(sol.path.terminal)]))
    out = {
        "action": sol.action,
        "length": sol.length,
        "n_points": sol.n_points,
        "optimal": sol.optimal,
        "path": verts.tolist(),
        "interior": list(sol.path.interior),
        "terminal": list(sol.path.terminal),
        "solver_log": dict(sol.solver_log, mode=sol.mode, candidates_used=sol.candidates_used),
    }
    _write_json(args.out, out)
    return EXIT_OK


def cmd_animal(args) -> int:
    seed = _seed(args)
    doc = _load(args.config)
    _reject_unknown(doc, _ANIMAL_KEYS, "config")
    n = args.n if args.n is not None else doc.get("n")
    if n is None:
        raise UsageError("animal needs --n")
    n = int(n)
    lam = args.lam if args.lam is not None else (doc.get("sample") or {}).get("lam")
    if args.grid:
        grid = grid_from_records(_jsonio.read_json(args.grid))
    elif isinstance(doc.get("grid"), list):
        grid = grid_from_records(doc["grid"])
    elif isinstance(doc.get("grid"), str):
        grid = grid_from_records(_jsonio.read_json(doc["grid"]))
    elif lam is not None:
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0)))
        r = n - 1
        vals = rng.poisson(float(lam), size=(2 * r + 1, 2 * r + 1))
        grid = AnimalGrid({(i - r, j - r): float(vals[i, j]) for i in range(2 * r + 1) for j in range(2 * r + 1)})
    else:
        raise UsageError("animal needs a grid (--grid, config 'grid') or --lam to sample one")
    method = "heuristic" if args.heuristic or doc.get("method") == "heuristic" else "exact"
    if method == "exact":
        an = greedy_animal_exact(grid, n)
    else:
        restarts = args.restarts if args.restarts is not None else int(doc.get("restarts", 16))
        an = greedy_animal_heuristic(grid, n, derive_seed(seed, 1), restarts)
    out = {
        "n": n,
        "method": method,
        "weight": an.weight,
        "cells": [list(c) for c in an.cells],
        "grid": grid_to_records(grid) if lam is not None and not args.grid else None,
    }
    if out["grid"] is None:
        del out["grid"]
    _write_json(args.out, out)
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--t must be a comma-separated list of numbers, got {text!r}") from None


def cmd_experiment(args) -> int:
    seed = _seed(args)
    doc = dict(_load(args.config))
    overrides = {
        "kind": args.kind,
        "c": args.c,
        "gamma": args.gamma,
        "gamma_prime": args.gamma_prime,
        "replicas": args.replicas,
        "intensity": args.intensity,
        "K": args.k,
    }
    for k, v in overrides.items():
        if v is not None:
            doc[k] = v
    if args.t is not None:
        doc["t_grid"] = _parse_grid(args.t)
    doc["master_seed"] = seed
    if args.exact:
        doc["solver"] = dict(doc.get("solver", {}), force_mode="exact", max_exact_points=24)
    spec = ExperimentSpec.from_dict(doc)
    if not args.out:
        raise UsageError("experiment needs --out <dir>")
    workers = args.workers if args.workers is not None else default_workers()
    report = run_experiment(spec, workers)
    paths = report.write(args.out, figures=not args.no_figures)
    for name, path in paths.items():
        print(f"{name}: {path}")
    if report.interrupted:
        print("interrupted: partial records written with a truncation marker row", file=sys.stderr)
        return EXIT_USAGE
    if report.violations:
        for v in report.violations[:20]:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


_COMMANDS = {"sample": cmd_sample, "geodesic": cmd_geodesic, "animal": cmd_animal, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: sample, geodesic, animal or experiment")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_USAGE
    except TooManyCandidates as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FPPError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
