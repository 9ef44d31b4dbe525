"""Seeded Monte Carlo drivers and their reports.

Every experiment is a list of independent tasks keyed by ``(t index, replica)``.
A task derives its own seed from the master seed and its key, so the records
do not depend on how many workers ran or in which order the tasks finished.
Records are folded into aggregates by pure functions of the records alone.

Windows: the plane is cut to a rectangle containing the pruning region of
every path with at most ``N_hat`` points, where ``N_hat`` is the expected
count in the corridor ``[0, t] x [-1, 1]`` around the straight path.  Each
record carries ``window_ok``: whether its path's own pruning region fits.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _jsonio
from .action import ActionParams
from .animals import bernoulli_tail_estimate, poisson_moment_estimate, poisson_tail_estimate
from .environment import PointConfig, Window, derive_seed, insert_points, sample_poisson
from .errors import SpecError, TooManyCandidates
from .geometry import TargetSet, line_target, make_variance_segments, transversal_deviation
from .solver import (
    GeodesicProblem,
    Mode,
    SolverOptions,
    baseline_action,
    candidate_points,
    max_length,
    pruning_box,
    solve,
    solve_exact,
    traced_lattice_path,
)
from .stats import jackknife_var, loglog_fit, mean_se, median_se, weighted_trend

__all__ = [
    "KINDS",
    "LocalityParams",
    "AnimalParams",
    "ExperimentSpec",
    "ExperimentReport",
    "experiment_window",
    "run_experiment",
    "run_moments",
    "run_xi",
    "run_variance_diff",
    "run_locality",
    "run_animal_tail",
    "aggregate",
    "read_records",
]

KINDS = ("Moments", "Xi", "VarianceDiff", "Locality", "AnimalTail")
CORRIDOR_HALF_WIDTH = 1.0
LOCALITY_START_LIMIT = 12
LOCALITY_SOLVE_LIMIT = 16
TRUNCATED = "TRUNCATED"

SUBSEQUENCE_NOTE = (
    "The asymptotic statements hold along a subsequence of scales that a finite "
    "experiment cannot select; the t grid here is user-chosen."
)
XI_NOTE = (
    "xi_hat is the log-log slope of the median transversal deviation; the exponent "
    "itself is a limit of containment probabilities, reported alongside as frequencies. "
    "Deviation uses path vertices only; the polyline can sag past them by at most "
    "half the longest leg."
)


@dataclass(frozen=True)
class LocalityParams:
    b: int = 4
    half_height: float = 1.0
    radii: tuple[float, ...] = (0.05, 0.1, 0.2, 0.4, 0.8)
    max_attempts: int = 200


@dataclass(frozen=True)
class AnimalParams:
    sizes: tuple[int, ...] = (1, 2, 4, 6, 8)
    lams: tuple[float, ...] = (1.0, 9.0, 25.0)
    epsilons: tuple[float, ...] = (0.05, 0.2)
    reps: int = 2000
    rho: float = 2.0
    c_tilde: float = 8.0
    moment_sizes: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)


_SUBSPECS = {"solver": SolverOptions, "locality": LocalityParams, "animal": AnimalParams}


@dataclass(frozen=True)
class ExperimentSpec:
    """A declarative experiment; invalid specs raise :class:`SpecError` listing every problem."""

    kind: str
    master_seed: int
    c: float = 0.2
    t_grid: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    gamma: float = 0.55
    gamma_prime: float = 0.6
    replicas: int = 200
    solver: SolverOptions = field(default_factory=SolverOptions)
    K: int = 1
    intensity: float = 1.0
    moment_orders: int = 4
    containment_gammas: tuple[float, ...] = (0.5, 0.6, 2.0 / 3.0, 0.75)
    locality: LocalityParams = field(default_factory=LocalityParams)
    animal: AnimalParams = field(default_factory=AnimalParams)

    def __post_init__(self):
        object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        object.__setattr__(self, "containment_gammas", tuple(float(g) for g in self.containment_gammas))
        problems = self.problems()
        if problems:
            raise SpecError(problems)

    def problems(self) -> list[str]:
        out = []
        if self.kind not in KINDS:
            out.append(f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
        if not isinstance(self.master_seed, (int, np.integer)) or not 0 <= self.master_seed < 2**64:
            out.append("master_seed must be an integer in [0, 2^64)")
        if not (0 < self.c <= 1):
            out.append(f"c must lie in (0, 1], got {self.c}")
        if self.kind != "AnimalTail":
            ts = self.t_grid
            if not ts:
                out.append("t_grid must be nonempty")
            elif not all(math.isfinite(t) and t > 0 for t in ts):
                out.append("t_grid entries must be positive and finite")
            elif any(b <= a for a, b in zip(ts, ts[1:])):
                out.append("t_grid must be strictly increasing")
            if self.kind == "VarianceDiff" and ts and min(ts) <= 1:
                out.append("VarianceDiff needs every t > 1")
        if not (isinstance(self.replicas, (int, np.integer)) and self.replicas >= 1):
            out.append("replicas must be an integer >= 1")
        if not (0.5 < self.gamma_prime < 1):
            out.append(f"gamma_prime must lie in (1/2, 1), got {self.gamma_prime}")
        if not self.gamma < self.gamma_prime:
            out.append(f"gamma must be below gamma_prime, got {self.gamma} >= {self.gamma_prime}")
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1 and self.K % 2 == 1):
            out.append(f"K must be an odd positive integer, got {self.K}")
        if not (math.isfinite(self.intensity) and self.intensity >= 0):
            out.append(f"intensity must be finite and nonnegative, got {self.intensity}")
        if not 1 <= self.moment_orders <= 4:
            out.append("moment_orders must lie in 1..4")
        loc = self.locality
        if loc.b < 1:
            out.append("locality.b must be >= 1")
        if not loc.half_height > 0:
            out.append("locality.half_height must be positive")
        if not all(r > 0 for r in loc.radii):
            out.append("locality.radii must be positive")
        an = self.animal
        if not all(1 <= n <= 8 for n in an.sizes) or not all(1 <= n <= 8 for n in an.moment_sizes):
            out.append("animal sizes must lie in 1..8")
        if not all(lam > 0 for lam in an.lams):
            out.append("animal.lams must be positive")
        if not all(0 <= e <= 1 for e in an.epsilons):
            out.append("animal.epsilons must lie in [0, 1]")
        if an.reps < 2:
            out.append("animal.reps must be >= 2")
        return out

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["solver"]["force_mode"] = self.solver.force_mode.value
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        """Build from a JSON-like mapping; unknown keys and bad values are all reported together."""
        problems = []
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, val in doc.items():
            if key not in names:
                problems.append(f"unknown field {key!r}")
                continue
            if key in _SUBSPECS:
                sub = _SUBSPECS[key]
                subnames = {f.name for f in dataclasses.fields(sub)}
                if not isinstance(val, dict):
                    problems.append(f"{key} must be an object")
                    continue
                bad = sorted(set(val) - subnames)
                problems.extend(f"unknown field {key}.{b!r}" for b in bad)
                try:
                    val = sub(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in val.items() if k in subnames})
                except (TypeError, ValueError) as exc:
                    problems.append(f"{key}: {exc}")
                    continue
            elif isinstance(val, list):
                val = tuple(val)
            kwargs[key] = val
        for req in ("kind", "master_seed"):
            if req not in kwargs:
                problems.append(f"missing required field {req!r}")
        if problems:
            try:
                cls(**kwargs)
            except SpecError as exc:
                problems.extend(exc.problems)
            except TypeError:
                pass
            raise SpecError(problems)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise SpecError([str(exc)]) from None

    @property
    def experiment_id(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    columns: list[str]
    records: list[dict]
    aggregates: dict
    metadata: dict
    fit: dict | None = None
    violations: list[str] = field(default_factory=list)
    timings: list[tuple] = field(default_factory=list)
    interrupted: bool = False

    def records_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for rec in self.records:
            w.writerow([_jsonio.fmt_cell(rec.get(c)) for c in self.columns])
        if self.interrupted:
            marker = {"experiment_id": self.spec.experiment_id, "kind": TRUNCATED}
            w.writerow([_jsonio.fmt_cell(marker.get(c)) for c in self.columns])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "experiment_id": self.spec.experiment_id,
            "kind": self.spec.kind,
            "notes": [SUBSEQUENCE_NOTE] + ([XI_NOTE] if self.spec.kind == "Xi" else []),
            "spec": self.spec.to_dict(),
            "metadata": self.metadata,
            "interrupted": self.interrupted,
            "violations": self.violations,
            "fit": self.fit,
            "aggregates": self.aggregates,
        }

    def write(self, out_dir, figures: bool = True) -> dict[str, str]:
        """Write records.csv, aggregates.json, timings.csv and (optionally) PNG figures."""
        os.makedirs(out_dir, exist_ok=True)
        paths = {
            "records": os.path.join(out_dir, "records.csv"),
            "aggregates": os.path.join(out_dir, "aggregates.json"),
            "timings": os.path.join(out_dir, "timings.csv"),
        }
        with open(paths["records"], "w", encoding="utf-8", newline="") as fh:
            fh.write(self.records_csv())
        _jsonio.write_json(paths["aggregates"], self.summary())
        with open(paths["timings"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "replica", "wall_ms"])
            for row in self.timings:
                w.writerow([_jsonio.fmt_cell(v) for v in row])
        if figures and self.records:
            from .plotting import render_figures

            for i, p in enumerate(render_figures(self, os.path.join(out_dir, "figures"))):
                paths[f"figure{i}"] = p
        return paths


def read_records(path) -> list[dict]:
    """Records back from a CSV file; numeric cells become floats, empty cells None."""
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if v == "":
                    rec[k] = None
                elif v in ("true", "false"):
                    rec[k] = v == "true"
                else:
                    try:
                        rec[k] = float(v)
                    except ValueError:
                        rec[k] = v
            out.append(rec)
    return out


# ---------------------------------------------------------------- windows


def experiment_window(spec: ExperimentSpec, t: float, targets: list[TargetSet], start=(0.0, 0.0)):
    """Window holding the pruning region of every path with at most ``N_hat`` points, plus a K margin."""
    s = spec.c * t
    n_hat = spec.intensity * t * 2 * CORRIDOR_HALF_WIDTH
    boxes, lengths = [], []
    for tgt in targets:
        probe = GeodesicProblem(_EMPTY, start, tgt, ActionParams(s))
        L = float(max_length(s, n_hat, baseline_action(probe)))
        boxes.append(pruning_box(start, tgt, L))
        lengths.append(L)
    b = np.array(boxes)
    K = spec.K
    win = Window(b[:, 0].min() - K, b[:, 1].max() + K, b[:, 2].min() - K, b[:, 3].max() + K)
    meta = {"n_hat": n_hat, "window_length": lengths, "window": win.as_dict()}
    return win, meta


_EMPTY = PointConfig(np.empty((0, 2)), Window(-1.0, 1.0, -1.0, 1.0))


def _window_ok(sol, problem, n_hat) -> bool:
    return sol.n_points <= n_hat


# ---------------------------------------------------------------- tasks


def _solver_for(spec: ExperimentSpec, seed: int) -> SolverOptions:
    return dataclasses.replace(spec.solver, heuristic_seed=derive_seed(seed, 1))


def _line_task(spec: ExperimentSpec, ti: int, r: int) -> list[dict]:
    t = spec.t_grid[ti]
    seed = derive_seed(spec.master_seed, ti, r)
    tgt = line_target(t)
    win, meta = experiment_window(spec, t, [tgt])
    cfg = sample_poisson(win, spec.intensity, derive_seed(seed, 0))
    prob = GeodesicProblem(cfg, (0.0, 0.0), tgt, ActionParams.scaled(spec.c, t), _solver_for(spec, seed))
    sol = solve(prob)
    pts = [(0.0, 0.0), *cfg.points[list(sol.path.interior)].tolist(), tuple(sol.path.terminal)]
    return [
        {
            "t": t,
            "replica": r,
            "derived_seed": seed,
            "action": sol.action,
            "length": sol.length,
            "n_points": sol.n_points,
            "deviation": transversal_deviation(pts, (1.0, 0.0)),
            "touched_squares": len(set(traced_lattice_path(sol, 1, cfg))),
            "speed": sol.length / (spec.c * t),
            "baseline": baseline_action(prob),
            "solver_mode": sol.mode,
            "n_candidates": sol.candidates_used,
            "n_window": len(cfg),
            "window_ok": _window_ok(sol, prob, meta["n_hat"]),
        }
    ]


def _variance_task(spec: ExperimentSpec, ti: int, r: int) -> list[dict]:
    t = spec.t_grid[ti]
    seed = derive_seed(spec.master_seed, ti, r)
    segs = make_variance_segments(t, spec.gamma_prime)
    win, meta = experiment_window(spec, t, [segs.S, segs.S_prime])
    cfg = sample_poisson(win, spec.intensity, derive_seed(seed, 0))
    params = ActionParams.scaled(spec.c, t)
    opts = _solver_for(spec, seed)
    pa = GeodesicProblem(cfg, (0.0, 0.0), segs.S, params, opts)
    pb = GeodesicProblem(cfg, (0.0, 0.0), segs.S_prime, params, opts)
    a, b = solve(pa), solve(pb)
    # the two minimizers share most of their route, so each is a good start for the other
    for _ in range(3):
        a2 = solve(pa, [b.path.interior]) if not a.optimal else a
        b2 = solve(pb, [a2.path.interior]) if not b.optimal else b
        if a2.action >= a.action - 1e-12 and b2.action >= b.action - 1e-12:
            break
        a = a2 if a2.action < a.action else a
        b = b2 if b2.action < b.action else b
    return [
        {
            "t": t,
            "replica": r,
            "derived_seed": seed,
            "theta": segs.theta,
            "action_S": a.action,
            "action_S_prime": b.action,
            "diff": a.action - b.action,
            "n_points_S": a.n_points,
            "n_points_S_prime": b.n_points,
            "baseline_S": baseline_action(pa),
            "baseline_S_prime": baseline_action(pb),
            "solver_mode": a.mode if a.mode == b.mode else "mixed",
            "n_window": len(cfg),
            "window_ok": _window_ok(a, pa, meta["n_hat"]) and _window_ok(b, pb, meta["n_hat"]),
        }
    ]


def _uniform_in_box(rng, box, win, k):
    x0, x1, y0, y1 = box
    x0, x1 = max(x0, win.xmin), min(x1, win.xmax)
    y0, y1 = max(y0, win.ymin), min(y1, win.ymax)
    return np.column_stack((rng.uniform(x0, x1, k), rng.uniform(y0, y1, k)))


def _uniform_in_disc(rng, centre, radius, win):
    while True:
        rho = radius * math.sqrt(rng.random())
        phi = 2 * math.pi * rng.random()
        p = (centre[0] + rho * math.cos(phi), centre[1] + rho * math.sin(phi))
        if win.contains(p)[0]:
            return p


def _locality_task(spec: ExperimentSpec, ti: int, r: int) -> list[dict]:
    """One insertion trial into a K-box on the traced path, then one single-point trial per radius."""
    t = spec.t_grid[ti]
    loc = spec.locality
    K = spec.K
    seed = derive_seed(spec.master_seed, ti, r)
    h = loc.half_height
    win = Window(-0.5, t + 0.5, -h, h)
    params = ActionParams.scaled(spec.c, t)
    opts = SolverOptions(max_exact_points=LOCALITY_SOLVE_LIMIT, force_mode=Mode.EXACT)
    tgt = line_target(t)
    for attempt in range(loc.max_attempts):
        sub = derive_seed(seed, attempt)
        cfg = sample_poisson(win, spec.intensity, sub)
        base = GeodesicProblem(cfg, (0.0, 0.0), tgt, params, opts)
        if len(candidate_points(base)) > LOCALITY_START_LIMIT:
            continue
        try:
            rows = _locality_trials(spec, ti, r, seed, attempt, cfg, base, win, K, loc)
        except TooManyCandidates:
            continue
        return rows
    return [{"t": t, "replica": r, "derived_seed": seed, "trial": "skipped", "attempt": loc.max_attempts}]


def _locality_trials(spec, ti, r, seed, attempt, cfg, base, win, K, loc):
    t = spec.t_grid[ti]
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, attempt, 7)))
    sol = solve_exact(base)
    common = {"t": t, "replica": r, "derived_seed": seed, "attempt": attempt, "action_before": sol.action}
    boxes = sorted(set(traced_lattice_path(sol, K, cfg)))
    bi, bj = boxes[int(rng.integers(len(boxes)))]
    j = int(rng.integers(1, loc.b + 1))
    box = (K * bi - K / 2, K * bi + K / 2, K * bj - K / 2, K * bj + K / 2)
    new = _uniform_in_box(rng, box, win, j)
    after = solve_exact(dataclasses.replace(base, config=insert_points(cfg, new)))
    g = sol.action - after.action
    rows = [
        dict(
            common,
            trial="box",
            box_i=bi,
            box_j=bj,
            j=j,
            radius=None,
            action_after=after.action,
            g=g,
            bound_ok=(-1e-9 <= g <= j + 1e-9),
            half_gain=None,
        )
    ]
    collected = cfg.points[list(sol.path.interior)]
    for rad in loc.radii:
        row = dict(common, trial="radius", box_i=None, box_j=None, j=1, radius=rad)
        if len(collected) == 0:
            rows.append(dict(row, action_after=None, g=None, bound_ok=None, half_gain=None))
            continue
        centre = collected[int(rng.integers(len(collected)))]
        p = _uniform_in_disc(rng, centre, rad, win)
        after = solve_exact(dataclasses.replace(base, config=insert_points(cfg, [p])))
        g = sol.action - after.action
        rows.append(dict(row, action_after=after.action, g=g, bound_ok=(-1e-9 <= g <= 1 + 1e-9), half_gain=g >= 0.5))
    return rows


def _animal_task(spec: ExperimentSpec, row: dict) -> list[dict]:
    an = spec.animal
    seed = derive_seed(spec.master_seed, row["index"])
    base = {"index": row["index"], "family": row["family"], "derived_seed": seed, "rho": an.rho}
    fam = row["family"]
    if fam in ("poisson", "sanity"):
        est = poisson_tail_estimate(row["n"], row["y"], row["lam"], an.reps, seed, enforce_regime=fam == "poisson")
        return [
            dict(
                base,
                n=est.n,
                lam=est.lam,
                y=est.y,
                reps=est.reps,
                exceedances=est.exceedances,
                probability=est.probability,
                stderr=est.stderr,
                bound=est.bound,
                consistent=est.consistent,
                mean_weight=est.mean_weight,
            )
        ]
    if fam == "bernoulli":
        est = bernoulli_tail_estimate(row["n"], row["epsilon"], an.reps, seed, an.c_tilde)
        return [
            dict(
                base,
                n=est.n,
                epsilon=est.epsilon,
                c_tilde=est.c_tilde,
                reps=est.reps,
                threshold=est.threshold,
                exceedances=est.exceedances,
                probability=est.probability,
                stderr=est.stderr,
                bound=est.reference,
                mean_weight=est.mean_weight,
                mean_stderr=est.mean_stderr,
                p_hat=est.p_hat,
            )
        ]
    fit = poisson_moment_estimate(an.moment_sizes, row["lam"], an.reps, seed)
    return [
        dict(
            base,
            n=n,
            lam=fit.lam,
            reps=an.reps,
            mean_weight=m,
            mean_stderr=se,
            c_fit=fit.c_fit,
            c_max=fit.c_max,
        )
        for n, m, se in zip(fit.sizes, fit.means, fit.stderrs)
    ]


def _animal_rows(spec: ExperimentSpec) -> list[dict]:
    an = spec.animal
    rows = []
    for lam in an.lams:
        for n in an.sizes:
            rows.append({"family": "poisson", "n": n, "lam": lam, "y": max(math.e**3 * lam, an.rho)})
    rows.append({"family": "sanity", "n": 1, "lam": 1.0, "y": 1e-12})
    for eps in an.epsilons:
        for n in an.sizes:
            rows.append({"family": "bernoulli", "n": n, "epsilon": eps})
    for lam in an.lams:
        rows.append({"family": "moment", "lam": lam})
    for i, row in enumerate(rows):
        row["index"] = i
    return rows


# ---------------------------------------------------------------- columns and aggregates

_HEAD = ["experiment_id", "kind"]
_LINE_COLS = _HEAD + [
    "c", "t", "replica", "derived_seed", "action", "length", "n_points", "deviation", "solver_mode",
    "touched_squares", "speed", "baseline", "n_candidates", "n_window", "window_ok",
]
_VAR_COLS = _HEAD + [
    "c", "t", "replica", "derived_seed", "theta", "action_S", "action_S_prime", "diff", "n_points_S",
    "n_points_S_prime", "baseline_S", "baseline_S_prime", "solver_mode", "n_window", "window_ok",
]
_LOC_COLS = _HEAD + [
    "c", "t", "replica", "derived_seed", "attempt", "trial", "box_i", "box_j", "j", "radius",
    "action_before", "action_after", "g", "bound_ok", "half_gain",
]
_ANIMAL_COLS = _HEAD + [
    "index", "family", "derived_seed", "n", "lam", "y", "epsilon", "c_tilde", "rho", "reps", "threshold",
    "exceedances", "probability", "stderr", "bound", "consistent", "mean_weight", "mean_stderr", "p_hat",
    "c_fit", "c_max",
]
COLUMNS = {"Moments": _LINE_COLS, "Xi": _LINE_COLS, "VarianceDiff": _VAR_COLS, "Locality": _LOC_COLS, "AnimalTail": _ANIMAL_COLS}


def _by_t(records, key="t"):
    groups: dict[float, list[dict]] = {}
    for rec in records:
        if rec.get("kind") == TRUNCATED:
            continue
        groups.setdefault(float(rec[key]), []).append(rec)
    return dict(sorted(groups.items()))


def _col(recs, name):
    return np.array([float(r[name]) for r in recs if r.get(name) is not None], dtype=float)


def _ratio(mean, se, scale):
    return mean / scale, se / scale


def _moments_agg(spec, records):
    c = spec.c
    rows = []
    for t, recs in _by_t(records).items():
        A = _col(recs, "action")
        L = _col(recs, "length")
        sq = _col(recs, "touched_squares")
        v = _col(recs, "speed")
        row = {"t": t, "n": len(recs)}
        row["action_mean"], row["action_se"] = mean_se(A)
        for k in range(1, spec.moment_orders + 1):
            m, se = mean_se(np.abs(A) ** k)
            row[f"abs_action_m{k}"], row[f"abs_action_m{k}_se"] = m, se
            row[f"abs_action_m{k}_ratio"], row[f"abs_action_m{k}_ratio_se"] = _ratio(m, se, (t / c) ** k)
            m, se = mean_se(L ** (2 * k))
            row[f"length_m{2*k}_ratio"], row[f"length_m{2*k}_ratio_se"] = _ratio(m, se, t ** (2 * k))
            m, se = mean_se(sq ** (2 * k))
            row[f"squares_m{2*k}_ratio"], row[f"squares_m{2*k}_ratio_se"] = _ratio(m, se, t ** (2 * k))
            row[f"speed_m{k}"], row[f"speed_m{k}_se"] = mean_se(v**k)
        rows.append(row)
    trend = weighted_trend(np.log([r["t"] for r in rows]), [r["speed_m1"] for r in rows], [r["speed_m1_se"] for r in rows])
    return {"per_t": rows, "speed_trend": dict(trend.as_dict(), no_trend=bool(abs(trend.z) <= 2) if rows else None)}, None


def _xi_agg(spec, records):
    rows = []
    for ti, (t, recs) in enumerate(_by_t(records).items()):
        dev = _col(recs, "deviation")
        row = {"t": t, "n": len(recs)}
        row["median_deviation"], row["median_deviation_se"] = median_se(dev, derive_seed(spec.master_seed, 99, ti))
        row["mean_deviation"], row["mean_deviation_se"] = mean_se(dev)
        row["mean_n_points"] = float(_col(recs, "n_points").mean())
        row["containment"] = {f"{g:.6g}": float(np.mean(dev <= t**g)) for g in spec.containment_gammas}
        rows.append(row)
    ts = [r["t"] for r in rows]
    med = [r["median_deviation"] for r in rows]
    fit = loglog_fit(ts, med) if len(rows) >= 2 and all(m > 0 for m in med) else None
    mono = all(b >= a for a, b in zip(med, med[1:]))
    agg = {"per_t": rows, "median_nondecreasing": mono}
    return agg, (fit.as_dict() if fit else None)


def _variance_agg(spec, records):
    gp, g = spec.gamma_prime, spec.gamma
    rows = []
    for t, recs in _by_t(records).items():
        d = _col(recs, "diff")
        row = {"t": t, "n": len(recs)}
        row["mean_diff"], row["mean_diff_se"] = mean_se(d)
        se = row["mean_diff_se"]
        row["mean_within_3se"] = bool(abs(row["mean_diff"]) <= 3 * se) if se and math.isfinite(se) else bool(row["mean_diff"] == 0)
        row["var"], row["var_se"] = jackknife_var(d)
        up, lo = t ** (2 * (2 * gp - 1)), t ** (1 - g)
        row["var_over_upper"], row["var_over_upper_se"] = row["var"] / up, row["var_se"] / up
        row["var_over_lower"], row["var_over_lower_se"] = row["var"] / lo, row["var_se"] / lo
        rows.append(row)
    trend = weighted_trend(
        np.log([r["t"] for r in rows]), [r["var_over_upper"] for r in rows], [r["var_over_upper_se"] for r in rows]
    )
    return {"per_t": rows, "upper_ratio_trend": dict(trend.as_dict(), no_upward_trend=bool(trend.z <= 2) if rows else None)}, None


def _locality_agg(spec, records):
    rows = []
    for t, recs in _by_t(records).items():
        box = [r for r in recs if r.get("trial") == "box"]
        g = _col(box, "g")
        j = _col(box, "j")
        row = {
            "t": t,
            "box_trials": len(box),
            "bound_violations": int(sum(1 for r in box if not r["bound_ok"])),
            "skipped": int(sum(1 for r in recs if r.get("trial") == "skipped")),
            "min_g": float(g.min()) if len(g) else None,
            "max_excess": float((g - j).max()) if len(g) else None,
            "mean_g_by_j": {str(int(k)): float(g[j == k].mean()) for k in sorted(set(j.tolist()))},
        }
        radius = []
        for rad in spec.locality.radii:
            rr = [r for r in recs if r.get("trial") == "radius" and r.get("radius") is not None and float(r["radius"]) == rad and r.get("g") is not None]
            hit = np.array([bool(r["half_gain"]) for r in rr], dtype=float)
            f, se = mean_se(hit) if len(hit) else (math.nan, math.nan)
            viol = sum(1 for r in rr if not r["bound_ok"])
            radius.append({"radius": rad, "trials": len(rr), "freq_half_gain": f, "freq_se": se, "bound_violations": viol})
        freqs = [x["freq_half_gain"] for x in radius]
        row["radius"] = radius
        row["freq_nonincreasing"] = all(b <= a for a, b in zip(freqs, freqs[1:]))
        rows.append(row)
    return {"per_t": rows}, None


def _animal_agg(spec, records):
    recs = [r for r in records if r.get("kind") != TRUNCATED]
    out = {"rho": spec.animal.rho, "c_tilde": spec.animal.c_tilde, "constants_note": "rho and c_tilde are engineering defaults, not values fixed by theory"}
    pois = [r for r in recs if r["family"] == "poisson"]
    out["poisson_all_consistent"] = all(bool(r["consistent"]) for r in pois)
    out["poisson_exceedances"] = int(sum(float(r["exceedances"]) for r in pois))
    san = [r for r in recs if r["family"] == "sanity"]
    if san:
        p = float(san[0]["probability"])
        out["sanity"] = {"probability": p, "expected": 1 - math.exp(-1.0), "abs_error": abs(p - (1 - math.exp(-1.0)))}
    mom = {}
    for r in recs:
        if r["family"] == "moment":
            mom[f"{float(r['lam']):.6g}"] = {"c_fit": float(r["c_fit"]), "c_max": float(r["c_max"])}
    out["moment_constants"] = mom
    return out, None


_AGG = {"Moments": _moments_agg, "Xi": _xi_agg, "VarianceDiff": _variance_agg, "Locality": _locality_agg, "AnimalTail": _animal_agg}


def aggregate(spec: ExperimentSpec, records: list[dict]) -> tuple[dict, dict | None]:
    """Aggregate tables (and fit, if any) as a pure function of the records."""
    return _AGG[spec.kind](spec, records)


def _violations(spec: ExperimentSpec, records: list[dict]) -> list[str]:
    out = []
    for r in records:
        if r.get("kind") == TRUNCATED:
            continue
        key = f"t={r.get('t')} replica={r.get('replica')}"
        if spec.kind in ("Moments", "Xi") and r["action"] > r["baseline"] + 1e-9:
            out.append(f"{key}: action above the straight-path baseline")
        if spec.kind == "VarianceDiff":
            if r["action_S"] > r["baseline_S"] + 1e-9 or r["action_S_prime"] > r["baseline_S_prime"] + 1e-9:
                out.append(f"{key}: action above the straight-path baseline")
        if spec.kind == "Locality" and r.get("bound_ok") is False:
            out.append(f"{key} trial={r['trial']}: locality bound 0 <= g <= j violated (g={r['g']}, j={r['j']})")
    return out


# ---------------------------------------------------------------- driver

_TASKS: dict[str, Callable] = {"Moments": _line_task, "Xi": _line_task, "VarianceDiff": _variance_task, "Locality": _locality_task}


def _timed(fn, spec, key, arg):
    t0 = time.perf_counter()
    rows = fn(spec, *arg)
    return key, rows, (time.perf_counter() - t0) * 1e3


def default_workers() -> int:
    env = os.environ.get("FPP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_experiment(spec: ExperimentSpec, workers: int | None = None, should_stop: Callable[[int], bool] | None = None) -> ExperimentReport:
    """Run all tasks of ``spec`` and fold them into a report.

    ``should_stop(done)`` is polled after each finished task; returning True,
    or a KeyboardInterrupt, ends the run early with ``interrupted`` set.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    if spec.kind == "AnimalTail":
        rows = _animal_rows(spec)
        jobs = [((row["index"], 0), _animal_task, (row,)) for row in rows]
    else:
        fn = _TASKS[spec.kind]
        jobs = [((ti, r), fn, (ti, r)) for ti in range(len(spec.t_grid)) for r in range(spec.replicas)]
    results: dict[tuple, tuple] = {}
    interrupted = False
    try:
        if workers == 1:
            for key, fn, arg in jobs:
                k, rows, ms = _timed(fn, spec, key, arg)
                results[k] = (rows, ms)
                if should_stop and should_stop(len(results)):
                    interrupted = len(results) < len(jobs)
                    break
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_timed, fn, spec, key, arg) for key, fn, arg in jobs]
                try:
                    for fut in as_completed(futs):
                        k, rows, ms = fut.result()
                        results[k] = (rows, ms)
                        if should_stop and should_stop(len(results)):
                            interrupted = len(results) < len(jobs)
                            break
                finally:
                    for f in futs:
                        f.cancel()
    except KeyboardInterrupt:
        interrupted = True
    eid = spec.experiment_id
    records, timings = [], []
    for key in sorted(results):
        rows, ms = results[key]
        for row in rows:
            rec = {"experiment_id": eid, "kind": spec.kind, "c": spec.c}
            rec.update(row)
            records.append(rec)
        if spec.kind != "AnimalTail":
            timings.append((spec.t_grid[key[0]], key[1], ms))
        else:
            timings.append((None, key[0], ms))
    aggs, fit = aggregate(spec, records)
    meta = _metadata(spec, records)
    return ExperimentReport(
        spec=spec,
        columns=COLUMNS[spec.kind],
        records=records,
        aggregates=aggs,
        metadata=meta,
        fit=fit,
        violations=_violations(spec, records),
        timings=timings,
        interrupted=interrupted,
    )


def _metadata(spec: ExperimentSpec, records: list[dict]) -> dict:
    meta: dict = {"records": len(records)}
    if spec.kind in ("Moments", "Xi", "VarianceDiff"):
        windows = []
        for t in spec.t_grid:
            if spec.kind == "VarianceDiff":
                segs = make_variance_segments(t, spec.gamma_prime)
                tg = [segs.S, segs.S_prime]
            else:
                tg = [line_target(t)]
            _, wm = experiment_window(spec, t, tg)
            windows.append(dict(wm, t=t))
        meta["truncation"] = {
            "policy": "pruning box of paths with at most n_hat points, n_hat = intensity * 2 t, plus K",
            "windows": windows,
            "window_ok_fraction": float(np.mean([bool(r["window_ok"]) for r in records])) if records else None,
        }
        modes: dict[str, int] = {}
        for r in records:
            modes[r["solver_mode"]] = modes.get(r["solver_mode"], 0) + 1
        meta["solver_modes"] = dict(sorted(modes.items()))
    if spec.kind == "Locality":
        meta["locality"] = {
            "window": "[-1/2, t+1/2] x [-h, h] resampled until at most "
            f"{LOCALITY_START_LIMIT} candidates; exact re-solves up to {LOCALITY_SOLVE_LIMIT}",
        }
    return meta


def _check_kind(spec, kind):
    if spec.kind != kind:
        raise SpecError([f"expected a {kind} spec, got {spec.kind}"])


def run_moments(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    _check_kind(spec, "Moments")
    return run_experiment(spec, workers)


def run_xi(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    _check_kind(spec, "Xi")
    return run_experiment(spec, workers)


def run_variance_diff(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    _check_kind(spec, "VarianceDiff")
    return run_experiment(spec, workers)


def run_locality(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    _check_kind(spec, "Locality")
    return run_experiment(spec, workers)


def run_animal_tail(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    _check_kind(spec, "AnimalTail")
    return run_experiment(spec, workers)
