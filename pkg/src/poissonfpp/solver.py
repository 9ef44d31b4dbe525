"""Action minimizers (geodesics) from a start point to a target set.

For a fixed number N of collected points the action ``L^2/(2s) - N`` is
strictly increasing in the path length L.  So among paths through a given set
of points only the shortest ordering matters, and the exact search reduces to
a Held-Karp dynamic program over (visited subset, last point) storing the
minimal length.  The action is applied only when closing each state onto the
target.

Candidate pruning is sound: a path with N interior points beats the straight
pointless path only if ``L <= sqrt(2 s (N + baseline))``, and every one of its
points p then satisfies ``|start - p| + dist(p, target) <= L``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from . import _kernels
from .action import ActionParams, PathSeq, path_action, path_length
from .environment import PointConfig, derive_seed
from .errors import BadBoxSize, BadParameter, TooManyCandidates
from .geometry import Line, Point2, Segment, TargetSet, as_point, closest_point, target_distances

__all__ = [
    "Mode",
    "SolverOptions",
    "GeodesicProblem",
    "PathSolution",
    "baseline_action",
    "candidate_points",
    "pruning_length",
    "pruning_box",
    "max_length",
    "solve_exact",
    "brute_force",
    "solve_heuristic",
    "solve",
    "touched_boxes",
    "traced_lattice_path",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 9
MEMORY_GUARD = 24


class Mode(str, Enum):
    AUTO = "auto"
    EXACT = "exact"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class SolverOptions:
    max_exact_points: int = 18
    heuristic_restarts: int = 8
    heuristic_seed: int = 0
    action_tolerance: float = 1e-9
    force_mode: Mode = Mode.AUTO

    def __post_init__(self):
        object.__setattr__(self, "force_mode", Mode(self.force_mode))
        if not 0 <= self.max_exact_points <= MEMORY_GUARD:
            raise BadParameter(f"max_exact_points must lie in [0, {MEMORY_GUARD}]")
        if self.heuristic_restarts < 1:
            raise BadParameter("heuristic_restarts must be at least 1")
        if not self.action_tolerance >= 0:
            raise BadParameter("action_tolerance must be nonnegative")


@dataclass(frozen=True)
class GeodesicProblem:
    config: PointConfig
    start: Point2
    target: TargetSet
    params: ActionParams
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))


@dataclass(frozen=True)
class PathSolution:
    path: PathSeq
    action: float
    length: float
    n_points: int
    optimal: bool
    candidates_used: int
    solver_log: dict

    @property
    def mode(self) -> str:
        return "exact" if self.optimal else "heuristic"


def baseline_action(problem: GeodesicProblem) -> float:
    _, d = closest_point(problem.target, problem.start)
    return d * d / (2.0 * problem.params.s)


def _keys(problem: GeodesicProblem) -> np.ndarray:
    pts = problem.config.points
    st = problem.start
    return np.hypot(pts[:, 0] - st.x, pts[:, 1] - st.y) + target_distances(problem.target, pts)


def candidate_points(problem: GeodesicProblem) -> list[int]:
    """Indices of configuration points that can appear on an optimal path.

    With ``R(N)`` the points whose detour length fits inside ``L_max(N)``, an
    optimal path collecting N points needs all of them in ``R(N)``, so only
    N with ``|R(N)| >= N`` are admissible.  Since ``R`` grows with N, the kept
    set is ``R`` at the largest admissible N.
    """
    if len(problem.config) == 0:
        return []
    return np.flatnonzero(_keys(problem) <= pruning_length(problem)).tolist()


def max_length(s: float, n, baseline: float):
    """Longest path with ``n`` points whose action can still reach ``baseline``."""
    return np.sqrt(2.0 * s * (np.asarray(n, dtype=float) + baseline))


def pruning_length(problem: GeodesicProblem) -> float:
    """Detour bound ``L_max(N*)`` used by :func:`candidate_points`."""
    m = len(problem.config)
    b = baseline_action(problem)
    ns = np.arange(m + 1)
    lmax = max_length(problem.params.s, ns, b) * (1 + 1e-12) + 1e-12
    if m == 0:
        return float(lmax[0])
    counts = np.searchsorted(np.sort(_keys(problem)), lmax, side="right")
    return float(lmax[int(ns[counts >= ns].max())])


def pruning_box(start, target: TargetSet, L: float) -> tuple[float, float, float, float]:
    """Axis-aligned box containing ``{p : |p - start| + dist(p, target) <= L}``.

    Works in the frame where the start is the origin and the target lies on
    the vertical line ``x = d``.  The region is inside the region of that whole
    line, ``-(L-d)/2 <= x <= (L+d)/2`` and ``|y| <= sqrt(2L(L-d))``, and for
    a bounded target also inside ``(ylo - L)/2 <= y <= (yhi + L)/2``, with
    ``[ylo, yhi]`` the target's extent along the line.
    """
    st = as_point(start)
    q, d = closest_point(target, st)
    if isinstance(target, Line):
        ux, uy = -target.direction.y, target.direction.x
        d = (target.origin.x - st.x) * ux + (target.origin.y - st.y) * uy
        if d < 0:
            ux, uy, d = -ux, -uy, -d
        ylo, yhi = -math.inf, math.inf
    else:
        if isinstance(target, Segment):
            ends = [target.a, target.b]
            dx, dy = target.b.x - target.a.x, target.b.y - target.a.y
            ux, uy = dy, -dx
        else:
            ends = [target.p, target.p]
            ux, uy = target.p.x - st.x, target.p.y - st.y
        nrm = math.hypot(ux, uy)
        if nrm == 0:
            ux, uy, nrm = 1.0, 0.0, 1.0
        ux, uy = ux / nrm, uy / nrm
        d = (ends[0].x - st.x) * ux + (ends[0].y - st.y) * uy
        if d < 0:
            ux, uy, d = -ux, -uy, -d
        along = [-(e.x - st.x) * uy + (e.y - st.y) * ux for e in ends]
        ylo, yhi = min(along), max(along)
    L = max(L, d)
    hw = math.sqrt(2.0 * L * (L - d))
    y0 = max(-hw, min(ylo, (ylo - L) / 2))
    y1 = min(hw, max(yhi, (yhi + L) / 2))
    x0, x1 = -(L - d) / 2, (L + d) / 2
    corners = np.array([(x0, y0), (x0, y1), (x1, y0), (x1, y1)])
    # back to world coordinates: x along (ux, uy), y along (-uy, ux)
    wx = st.x + corners[:, 0] * ux - corners[:, 1] * uy
    wy = st.y + corners[:, 0] * uy + corners[:, 1] * ux
    return float(wx.min()), float(wx.max()), float(wy.min()), float(wy.max())


def _terminal_from(problem: GeodesicProblem, interior, pts) -> Point2:
    last = problem.start if not interior else Point2(*map(float, pts[interior[-1]]))
    q, _ = closest_point(problem.target, last)
    return q


def _finish(problem, interior, optimal, n_cand, log) -> PathSolution:
    pts = problem.config.points
    interior = tuple(int(k) for k in interior)
    path = PathSeq(problem.start, interior, _terminal_from(problem, interior, pts))
    return PathSolution(
        path=path,
        action=path_action(path, problem.config, problem.params),
        length=path_length(path, problem.config),
        n_points=len(interior),
        optimal=optimal,
        candidates_used=n_cand,
        solver_log=log,
    )


def _geometry(problem: GeodesicProblem, cand: list[int]):
    P = problem.config.points[cand] if cand else np.empty((0, 2))
    st = problem.start
    d0 = np.hypot(P[:, 0] - st.x, P[:, 1] - st.y)
    D = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
    dT = target_distances(problem.target, P)
    _, dbase = closest_point(problem.target, st)
    return P, d0, D, dT, dbase


def _pick(actions_and_seqs, amin):
    """Tie rule: within rounding of the minimum prefer fewer points, then the lexicographically smallest indices."""
    tie = 1e-12 * max(1.0, abs(amin))
    tied = [(len(seq), seq) for a, seq in actions_and_seqs if a <= amin + tie]
    return min(tied)[1]


def _popcounts(n: int) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    pc = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        pc += (masks >> b) & 1
    return pc


def solve_exact(problem: GeodesicProblem) -> PathSolution:
    """Global optimum by the subset dynamic program described in the module docstring."""
    cand = candidate_points(problem)
    n = len(cand)
    limit = problem.options.max_exact_points
    if n > limit:
        raise TooManyCandidates(n, limit, "use the heuristic solver or shrink the instance")
    s = problem.params.s
    P, d0, D, dT, dbase = _geometry(problem, cand)
    log = {"states_expanded": 0, "prune_hits": len(problem.config) - n}
    if n == 0:
        return _finish(problem, (), True, 0, log)

    full = 1 << n
    dp = np.full((full, n), np.inf)
    bits = 1 << np.arange(n, dtype=np.int64)
    dp[bits, np.arange(n)] = d0
    pc = _popcounts(n)
    DT = D.T  # DT[k, j] = |x_j - x_k|
    for level in range(2, n + 1):
        masks = np.flatnonzero(pc == level)
        for lo in range(0, len(masks), 4096):
            ms = masks[lo : lo + 4096]
            has = (ms[:, None] & bits[None, :]) != 0  # (m, k)
            prev = ms[:, None] ^ bits[None, :]  # drop k
            # best[m, k] = min_j dp[prev, j] + |x_j - x_k|
            vals = dp[prev] + DT[None, :, :]
            best = vals.min(axis=2)
            best[~has] = np.inf
            dp[ms] = best
            log["states_expanded"] += int(has.sum())

    total = dp + dT[None, :]
    act = total * total / (2 * s) - pc[:, None]
    base = dbase * dbase / (2 * s)
    amin = min(float(act.min()), base)
    tie = 1e-12 * max(1.0, abs(amin))
    options = [(base, ())] if base <= amin + tie else []
    for mask, j in zip(*np.nonzero(act <= amin + tie)):
        seq = _backtrack(dp, D, d0, int(mask), int(j), bits)
        options.append((float(act[mask, j]), tuple(cand[q] for q in seq)))
    return _finish(problem, _pick(options, amin), True, n, log)


def _backtrack(dp, D, d0, mask, j, bits) -> list[int]:
    seq = [j]
    while mask != int(bits[j]):
        prev = mask ^ int(bits[j])
        i = int(np.argmin(dp[prev] + D[:, j]))
        seq.append(i)
        mask, j = prev, i
    return seq[::-1]


@lru_cache(maxsize=None)
def _perms(n: int, k: int) -> np.ndarray:
    return np.asarray(list(itertools.permutations(range(n), k)), dtype=np.int64).reshape(-1, k)


def brute_force(problem: GeodesicProblem, prune: bool = True) -> PathSolution:
    """Exhaustive optimum over every subset and every order of the candidates.

    With ``prune=False`` all configuration points are enumerated, which makes
    this an independent check of :func:`candidate_points` as well.
    """
    cand = candidate_points(problem) if prune else list(range(len(problem.config)))
    n = len(cand)
    if n > BRUTE_FORCE_LIMIT:
        raise TooManyCandidates(n, BRUTE_FORCE_LIMIT, "brute force is an oracle for tiny instances")
    s = problem.params.s
    P, d0, D, dT, dbase = _geometry(problem, cand)
    options = [(dbase * dbase / (2 * s), ())]
    for k in range(1, n + 1):
        perm = _perms(n, k)
        L = d0[perm[:, 0]] + dT[perm[:, -1]]
        for q in range(k - 1):
            L = L + D[perm[:, q], perm[:, q + 1]]
        act = L * L / (2 * s) - k
        i = int(np.argmin(act))
        tie = 1e-12 * max(1.0, abs(float(act[i])))
        for r in np.flatnonzero(act <= act[i] + tie):
            options.append((float(act[r]), tuple(cand[q] for q in perm[r])))
    amin = min(a for a, _ in options)
    log = {"states_expanded": sum(len(_perms(n, k)) for k in range(1, n + 1)), "prune_hits": len(problem.config) - n}
    return _finish(problem, _pick(options, amin), True, n, log)


def _order_direction(problem: GeodesicProblem) -> tuple[float, float]:
    st = problem.start
    q, d = closest_point(problem.target, st)
    if d > 0:
        return (q.x - st.x) / d, (q.y - st.y) / d
    if isinstance(problem.target, Line):
        return -problem.target.direction.y, problem.target.direction.x
    return 1.0, 0.0


def _seed_paths(P, st, dT, dbase, s, direction) -> list[np.ndarray]:
    """Monotone linearized seeds for the cost ``mu L - N``.

    ``mu`` is first iterated as ``L / s`` (the slope of the action in L) until
    the path repeats, then swept around the fixed point.  Distinct seeds are
    returned best action first.
    """
    ux, uy = direction
    proj = (P[:, 0] - st.x) * ux + (P[:, 1] - st.y) * uy
    perp = -(P[:, 0] - st.x) * uy + (P[:, 1] - st.y) * ux
    order = np.argsort(proj, kind="stable")
    d0 = np.hypot(P[:, 0] - st.x, P[:, 1] - st.y)
    found: dict[tuple, float] = {}

    def run(mu):
        reach = max(2.0, 3.0 / mu)
        seq = _kernels.monotone_seed(P, order, proj, perp, st.x, st.y, dT, mu, reach)
        L = _seq_length(P, seq, d0, dT, dbase)
        found.setdefault(tuple(seq.tolist()), L * L / (2 * s) - len(seq))
        return L

    mu = max(dbase / s, 1e-3)
    for _ in range(12):
        before = len(found)
        mu = max(run(mu) / s, 1e-3)
        if len(found) == before:
            break
    for f in (0.6, 1.6, 0.35, 2.5):
        run(mu * f)
    ranked = sorted(found.items(), key=lambda kv: (kv[1], len(kv[0]), kv[0]))
    return [np.asarray(k, np.int64) for k, _ in ranked]


def _seq_length(P, seq, d0, dT, dbase) -> float:
    if len(seq) == 0:
        return dbase
    v = P[seq]
    return float(d0[seq[0]] + np.hypot(*np.diff(v, axis=0).T).sum() + dT[seq[-1]])


def _cheapest_insert(P, seq, c, st, dT) -> np.ndarray:
    """Insert candidate ``c`` where it lengthens the sequence least."""
    verts = np.vstack(([tuple(st)], P[seq]))
    d1 = np.hypot(verts[:, 0] - P[c, 0], verts[:, 1] - P[c, 1])
    nxt = np.hypot(verts[1:, 0] - P[c, 0], verts[1:, 1] - P[c, 1]) - np.hypot(*np.diff(verts, axis=0).T)
    last = dT[c] - (dT[seq[-1]] if len(seq) else 0.0)
    i = int(np.argmin(d1 + np.append(nxt, last)))
    return np.concatenate((seq[:i], [c], seq[i:])).astype(np.int64)


WINDOW_SPAN = 4
WINDOW_POINTS = 10


def _window_polish(P, seq, st, d0, dT, dbase, kind, tp, s, tol):
    """Re-solve short stretches of the path exactly.

    A window runs from vertex ``i`` to vertex ``i + WINDOW_SPAN`` (or to the
    target).  Its current interior points plus the unused candidates with the
    smallest detour form a local set of at most ``WINDOW_POINTS`` points; a
    subset dynamic program gives the shortest stretch through every possible
    number of them, and the count that lowers the full action most is kept.
    Returns the improved sequence and whether anything changed.
    """
    seq = np.asarray(seq, np.int64)
    changed = False
    i = 0
    while True:
        n = len(seq)
        if i > n:
            break
        L = _seq_length(P, seq, d0, dT, dbase)
        N = n
        j = min(i + WINDOW_SPAN, n + 1)
        ax, ay = (st.x, st.y) if i == 0 else (P[seq[i - 1], 0], P[seq[i - 1], 1])
        inner = seq[i : j - 1]
        verts = np.vstack(([(ax, ay)], P[inner]))
        if j <= n:
            bx, by = P[seq[j - 1]]
            old = float(np.hypot(*np.diff(np.vstack((verts, [(bx, by)])), axis=0).T).sum())
            end_all = np.hypot(P[:, 0] - bx, P[:, 1] - by)
            end0 = math.hypot(bx - ax, by - ay)
        else:
            old = float(np.hypot(*np.diff(verts, axis=0).T).sum()) + (dT[inner[-1]] if len(inner) else dbase if i == 0 else dT[seq[i - 1]])
            end_all = dT
            end0 = dbase if i == 0 else float(dT[seq[i - 1]])
        free = np.ones(len(P), bool)
        free[seq] = False
        excess = np.hypot(P[:, 0] - ax, P[:, 1] - ay) + end_all - end0
        room = WINDOW_POINTS - len(inner)
        slack = math.sqrt(L * L + 2 * s * (room + 1)) - L + (old - end0)
        pool = np.flatnonzero(free & (excess < slack))
        pool = pool[np.argsort(excess[pool], kind="stable")[:room]]
        local = np.concatenate((inner, pool)).astype(np.int64)
        if len(local) == 0:
            i += 1
            continue
        best, bmask, blast, par = _kernels.window_dp(ax, ay, np.ascontiguousarray(P[local]), np.ascontiguousarray(end_all[local]), end0)
        cur = L * L / (2 * s) - N
        counts = np.arange(len(best))
        newL = L - old + best
        acts = newL * newL / (2 * s) - (N - len(inner) + counts)
        acts[~np.isfinite(best)] = np.inf
        c = int(np.argmin(acts))
        if acts[c] < cur - tol:
            route = []
            if c > 0:
                mask, last = int(bmask[c]), int(blast[c])
                while last >= 0:
                    route.append(int(local[last]))
                    prev = int(par[mask, last])
                    mask ^= 1 << last
                    last = prev
                route.reverse()
            seq = np.concatenate((seq[:i], np.asarray(route, np.int64), seq[j - 1 :])).astype(np.int64)
            changed = True
            continue
        i += 1
    return seq, changed


def solve_heuristic(problem: GeodesicProblem, warm_starts=()) -> PathSolution:
    """Local search from several starts; never worse than the straight path.

    The first start is the straight path, the next ones are monotone
    dynamic-programming seeds for the linearized cost.  Remaining starts kick
    the incumbent, alternately dropping a random contiguous block of its points
    and inserting a random small cluster of unused points.  Each start descends
    with best-improvement moves until nothing gains more than the tolerance.
    ``warm_starts`` are extra interior-index sequences descended before the
    kicks (indices outside the candidate set are dropped).
    """
    opts = problem.options
    cand = candidate_points(problem)
    n = len(cand)
    s = problem.params.s
    st = problem.start
    log = {"states_expanded": 0, "prune_hits": len(problem.config) - n, "restarts": opts.heuristic_restarts}
    if n == 0:
        return _finish(problem, (), False, 0, log)
    P = np.ascontiguousarray(problem.config.points[cand])
    d0 = np.hypot(P[:, 0] - st.x, P[:, 1] - st.y)
    dT = target_distances(problem.target, P)
    _, dbase = closest_point(problem.target, st)
    kind, tp = problem.target.kind, problem.target.params()
    tol = opts.action_tolerance
    max_iter = 20 * n + 1000
    grid = _kernels.build_grid(P)

    def descend(seq0):
        seq, it = _kernels.local_search(
            P, np.asarray(seq0, np.int64), st.x, st.y, kind, tp, dT, dbase, s, tol, max_iter, grid
        )
        log["states_expanded"] += int(it)
        L = _seq_length(P, seq, d0, dT, dbase)
        return seq, L * L / (2 * s) - len(seq)

    best_seq, best_act = descend(np.empty(0, np.int64))
    pos = {k: q for q, k in enumerate(cand)}
    for ws in warm_starts:
        seq, a = descend([pos[k] for k in ws if k in pos])
        if a < best_act - 1e-12:
            best_seq, best_act = seq, a
    budget = opts.heuristic_restarts - 1
    seeds = _seed_paths(P, st, dT, dbase, s, _order_direction(problem)) if budget else []
    seeds = seeds[: max(1, budget // 2)]
    for r in range(1, opts.heuristic_restarts):
        if r <= len(seeds):
            start_seq = seeds[r - 1]
        else:
            rng = np.random.Generator(np.random.PCG64(derive_seed(opts.heuristic_seed, r)))
            k = len(best_seq)
            if r % 2 == 0 and k:
                width = int(rng.integers(1, max(1, k // 3) + 1))
                lo = int(rng.integers(0, k - width + 1))
                start_seq = np.concatenate((best_seq[:lo], best_seq[lo + width :]))
            else:
                free = np.setdiff1d(np.arange(n), best_seq)
                if not len(free):
                    continue
                c = int(rng.choice(free))
                near = free[np.argsort(np.hypot(P[free, 0] - P[c, 0], P[free, 1] - P[c, 1]), kind="stable")]
                start_seq = np.asarray(best_seq, np.int64)
                for e in near[: int(rng.integers(1, 4))]:
                    start_seq = _cheapest_insert(P, start_seq, int(e), st, dT)
        seq, a = descend(start_seq)
        if a < best_act - 1e-12:
            best_seq, best_act = seq, a
    for _ in range(20):
        best_seq, changed = _window_polish(P, best_seq, st, d0, dT, dbase, kind, tp, s, tol)
        if not changed:
            break
        best_seq, best_act = descend(best_seq)
    return _finish(problem, [cand[q] for q in best_seq], False, n, log)


def solve(problem: GeodesicProblem, warm_starts=()) -> PathSolution:
    """Exact when forced or when the candidates fit ``max_exact_points``, else heuristic.

    ``warm_starts`` only affect the heuristic.
    """
    mode = problem.options.force_mode
    if mode is Mode.EXACT:
        return solve_exact(problem)
    if mode is Mode.HEURISTIC:
        return solve_heuristic(problem, warm_starts)
    if len(candidate_points(problem)) <= problem.options.max_exact_points:
        return solve_exact(problem)
    return solve_heuristic(problem, warm_starts)


def _check_k(K) -> int:
    if int(K) != K or K < 1 or int(K) % 2 == 0:
        raise BadBoxSize(f"box side must be an odd positive integer, got {K}")
    return int(K)


def touched_boxes(solution: PathSolution, config: PointConfig, K: int = 1) -> set[tuple[int, int]]:
    """Side-K boxes containing at least one collected point."""
    K = _check_k(K)
    idx = list(solution.path.interior)
    if not idx:
        return set()
    cells = np.floor(config.points[idx] / K + 0.5).astype(np.int64)
    return {(int(i), int(j)) for i, j in cells}


def _polyline(solution: PathSolution, config: PointConfig | None) -> np.ndarray:
    path = solution.path
    if path.interior and config is None:
        raise BadParameter("the configuration is needed to trace a path with interior points")
    mid = config.points[list(path.interior)] if path.interior else np.empty((0, 2))
    return np.vstack(([tuple(path.start)], mid, [tuple(path.terminal)]))


def traced_lattice_path(solution: PathSolution, K: int = 1, config: PointConfig | None = None) -> list[tuple[int, int]]:
    """Side-K boxes the polyline passes through, in order, with 4-neighbour steps.

    A segment through a box corner steps in x before y.  Consecutive
    duplicates are merged, so successive entries always differ by one step.
    """
    K = _check_k(K)
    verts = _polyline(solution, config)
    return trace_polyline(verts, K)


def trace_polyline(verts: np.ndarray, K: int = 1) -> list[tuple[int, int]]:
    u = np.asarray(verts, dtype=float) / K + 0.5  # box (i, j) is [i, i+1) x [j, j+1) in these units
    cell = (math.floor(u[0, 0]), math.floor(u[0, 1]))
    out = [cell]
    for a, b in zip(u[:-1], u[1:]):
        out.extend(_traverse(a, b))
    merged = [out[0]]
    for c in out[1:]:
        if c != merged[-1]:
            merged.append(c)
    return merged


def _traverse(a, b) -> list[tuple[int, int]]:
    i, j = math.floor(a[0]), math.floor(a[1])
    i1, j1 = math.floor(b[0]), math.floor(b[1])
    dx, dy = b[0] - a[0], b[1] - a[1]
    nx, ny = abs(i1 - i), abs(j1 - j)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    # parameter values of the next x / y box boundary
    if nx:
        bx = i + 1 if dx > 0 else i
        tx, ddx = (bx - a[0]) / dx, 1.0 / abs(dx)
    if ny:
        by = j + 1 if dy > 0 else j
        ty, ddy = (by - a[1]) / dy, 1.0 / abs(dy)
    cells = []
    while nx or ny:
        if nx and (not ny or tx <= ty):
            i += sx
            nx -= 1
            tx += ddx
        else:
            j += sy
            ny -= 1
            ty += ddy
        cells.append((i, j))
    return cells
